"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the code paths they check: power
iteration instead of the packaged eigensolver, the closed-form Gaussian
ReLU product moment instead of the Monte-Carlo harness, breadth-first
component counting instead of the positivity-pattern walker.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from gnnlab import graphs as G
from gnnlab import spectral as S

ACCEPTANCE_SEED = 20260808


def power_iteration_top(matrix: np.ndarray, iters: int = 4000) -> tuple[float, np.ndarray]:
    """Independent top-eigenpair oracle (shifted power iteration)."""
    n = matrix.shape[0]
    shift = float(np.max(np.abs(matrix))) * n + 1.0
    v = np.full(n, 1.0 / math.sqrt(n))
    M = matrix + shift * np.eye(n)
    for _ in range(iters):
        w = M @ v
        v = w / np.linalg.norm(w)
    lam = float(v @ matrix @ v)
    return lam, v


def count_components(num_vertices: int, edges: np.ndarray) -> int:
    """BFS component count over an undirected edge list."""
    adj = [[] for _ in range(num_vertices)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * num_vertices
    count = 0
    for start in range(num_vertices):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return count


def relu_product_moment(k11: float, k22: float, k12: float) -> float:
    """Exact E[relu(z1) relu(z2)] for centered jointly Gaussian (z1, z2).

    Arc-cosine closed form: with rho = k12 / sqrt(k11 k22),
    E = sqrt(k11 k22) / (2 pi) * (sqrt(1 - rho^2) + rho (pi - arccos rho)).
    Test-only oracle; independent of the package's Monte-Carlo harness.
    """
    scale = math.sqrt(k11 * k22)
    if scale == 0:
        return 0.0
    rho = min(max(k12 / scale, -1.0), 1.0)
    return scale / (2 * math.pi) * (
        math.sqrt(max(1 - rho * rho, 0.0)) + rho * (math.pi - math.acos(rho))
    )


def fit_slope(xs, ys) -> float:
    """Plain least-squares slope."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xc = xs - xs.mean()
    return float(np.sum(xc * (ys - ys.mean())) / np.sum(xc * xc))


def finite_difference_check(arch, x, seed, coords=6, eps=1e-5):
    """Max relative error of reverse-mode weight gradients against central
    finite differences on ``coords`` random coordinates per weight matrix."""
    from gnnlab import engine as E

    state = E.init_weights(arch, seed=seed)
    trace = E.forward(state, arch, x)
    rng = np.random.default_rng(seed + 1)
    direction = rng.normal(size=trace.output.shape)
    grads = E.backward(state, arch, trace, direction)
    worst = 0.0
    for widx in range(len(state.weights)):
        shape = state.weights[widx].shape
        for _ in range(coords):
            i, j = rng.integers(shape[0]), rng.integers(shape[1])
            perturbed = [w.copy() for w in state.weights]

            def value(delta):
                perturbed[widx][i, j] = state.weights[widx][i, j] + delta
                s = E.NetworkState(weights=tuple(np.array(w) for w in perturbed),
                                   seed=0, scheme_name="fd")
                return float(np.sum(E.forward(s, arch, x).output * direction))

            fd = (value(eps) - value(-eps)) / (2 * eps)
            analytic = grads[widx][i, j]
            scale = max(abs(fd), abs(analytic), 1e-8)
            worst = max(worst, abs(fd - analytic) / scale)
    return worst


def jacobian_fd_check(arch, x, seed, eps=1e-6):
    """Max relative error of the forward-mode input Jacobian against
    central finite differences for one random input coordinate."""
    from gnnlab import engine as E

    state = E.init_weights(arch, seed=seed)
    rng = np.random.default_rng(seed + 2)
    v0 = int(rng.integers(x.shape[0]))
    i0 = int(rng.integers(x.shape[1]))
    jac = E.input_jacobian_rows(state, arch, x, v0, i0)
    xp, xm = x.copy(), x.copy()
    xp[v0, i0] += eps
    xm[v0, i0] -= eps
    tp = E.forward(state, arch, xp)
    tm = E.forward(state, arch, xm)
    worst = 0.0
    for ell in jac:
        fd = (tp.layer(ell) - tm.layer(ell)) / (2 * eps)
        scale = max(float(np.max(np.abs(fd))), float(np.max(np.abs(jac[ell]))), 1e-8)
        worst = max(worst, float(np.max(np.abs(fd - jac[ell]))) / scale)
    return worst


def small_graph(seed: int = 3, n: int = 24, a: float = 6.0, b: float = 1.0) -> G.Graph:
    params = G.SSBMParams(n=n, a=a, b=b, seed=seed)
    g = G.generate_ssbm(params)
    g = G.synthesize_features(g, 4, 2.0, seed + 1)
    return G.with_masks(g, G.split_vertices(g, (0.5, 0.25, 0.25), seed + 2))


@pytest.fixture(scope="session")
def tiny_graph() -> G.Graph:
    return small_graph()


@pytest.fixture(scope="session")
def tiny_operator(tiny_graph) -> S.AggregationOperator:
    return S.normalized_adjacency(tiny_graph, self_loops=True)


@pytest.fixture(scope="session")
def ssbm815() -> G.Graph:
    """The production-scale two-block graph used by the acceptance suite."""
    params = G.SSBMParams(n=800, a=8.0, b=1.5, seed=ACCEPTANCE_SEED)
    g = G.generate_ssbm(params)
    g = G.synthesize_features(g, 8, 2.25, ACCEPTANCE_SEED + 1)
    return G.with_masks(g, G.split_vertices(g, (0.5, 0.25, 0.25), ACCEPTANCE_SEED + 2))


@pytest.fixture(scope="session")
def ssbm815_operator(ssbm815) -> S.AggregationOperator:
    return S.normalized_adjacency(ssbm815, self_loops=True)
