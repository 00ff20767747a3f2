"""Closed-form evaluation of the trace and oversmoothing bounds, plus
Monte-Carlo harnesses for the distributional lemmas behind them.

The central objects are the per-layer trace multipliers

    a_l = (1/2) * C_W^{l+1} * n_l * lam1(P_l)^2,    A_l = prod a,

which bracket ``tr K_{l+1}`` between ``A_l tr(K_1 Pi1)`` and
``A_l tr(K_1)`` (and the same for the gradient covariance traces). The
generalized He variance ``2 / (fan_in * lam1^2)`` makes every ``a_l``
exactly 1, which is the depth-stability statement.

For the oversmoothing ratio the corridor is

    lower: (1 + (1/r_1 - 1) * prod (lam2/lam1)^2)^{-1}
    upper: min{1, (prod lam1/lam_min)^2 * r_1}

where the upper bound is reported as the vacuous 1 whenever an operator
has ``lam_min <= 0`` (the squared-ratio derivation presumes positive
definiteness). Note the upper bound controls only the aggregation
geometry: the ReLU nonlinearity injects second-moment mass into the top
eigenspace (its post-activation mean is a nonnegative vertex profile), so
measured ratios can exceed it; the package asserts lower bounds only.

A residual family ``(1 - t_l) I + t_l P`` turns the lower corridor into a
function of ``sum t_l`` alone:

    (1 + exp[(lam2 - lam1) / max(1, lam1) * sum t])^{-1},

so holding the total aggregation strength fixed pins the bound independent
of depth. The corollary's literal upper-bound expression carries a factor
``(1 - 1/r_1)^{-1}`` that is negative for r_1 in (0, 1); it is reported
verbatim but flagged, alongside the directly derived mapped-eigenvalue
upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import ratio_mean_se
from .engine import Architecture
from .errors import ParameterError
from .graphs import Graph
from .rng import stream
from .spectral import normalized_adjacency


def he_variance(fan_in: int, lam1: float) -> float:
    """Weight variance ``2 / (fan_in * lam1^2)``."""
    if fan_in < 1:
        raise ParameterError(f"fan-in must be >= 1, got {fan_in}")
    if lam1 <= 0:
        raise ParameterError(f"top eigenvalue must be positive, got {lam1}")
    return 2.0 / (fan_in * lam1**2)


@dataclass(frozen=True)
class TheoryBounds:
    """Per-layer multipliers and trace/oversmoothing corridors.

    Row ``i`` describes layer ``layers[i]`` (= l + 1 for multiplier A_l).
    """

    layers: tuple[int, ...]
    a: tuple[float, ...]
    cumulative: tuple[float, ...]
    trace_lower: tuple[float, ...]
    trace_upper: tuple[float, ...]
    ratio_lower: tuple[float, ...]
    ratio_upper: tuple[float, ...]
    ratio_upper_vacuous: tuple[bool, ...]

    def row(self, layer: int) -> dict:
        i = self.layers.index(layer)
        return {
            "layer": layer,
            "a": self.a[i],
            "A": self.cumulative[i],
            "trace_lower": self.trace_lower[i],
            "trace_upper": self.trace_upper[i],
            "ratio_lower": self.ratio_lower[i],
            "ratio_upper": self.ratio_upper[i],
        }


def layer_multipliers(arch: Architecture) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """(a_l, A_l) for l = 1..depth.

    ``a_l`` pairs the variance of the weight matrix following hidden layer
    l with that layer's width and operator. In residual mode the skip path
    bypasses the multiplier story, so the corridor is only meaningful for
    vanilla wiring; the multipliers are still computed from the same
    layer quantities.
    """
    variances = arch.weight_variances()
    widths = arch.hidden_widths
    ops = arch.operators
    offset = 1 if arch.residual_mode else 0
    a = []
    for ell in range(1, arch.depth + 1):
        cw_next = variances[ell + offset]
        a.append(0.5 * cw_next * widths[ell - 1] * ops[ell - 1].lam1 ** 2)
    cumulative = list(np.cumprod(a))
    return tuple(a), tuple(float(v) for v in cumulative)


def trace_corridor(
    arch: Architecture,
    k1_trace: float,
    k1_projected_trace: float,
    r1: float | None = None,
) -> TheoryBounds:
    """Corridors for tr K_{l+1} and r_{l+1}, l = 1..depth.

    ``k1_trace`` and ``k1_projected_trace`` come from the exact first-layer
    covariance (or its gradient analog; the same multipliers apply).
    """
    if k1_trace <= 0:
        raise ParameterError(f"first-layer trace must be positive, got {k1_trace}")
    if not 0.0 <= k1_projected_trace <= k1_trace * (1 + 1e-12):
        raise ParameterError("projected trace must lie in [0, tr K1]")
    a, cumulative = layer_multipliers(arch)
    r1 = k1_projected_trace / k1_trace if r1 is None else r1
    ops = arch.operators
    layers, tr_lo, tr_hi, r_lo, r_hi, vac = [], [], [], [], [], []
    ratio_prod = 1.0
    spread_prod = 1.0
    vacuous = False
    for ell in range(1, arch.depth + 1):
        op = ops[ell - 1]
        layers.append(ell + 1)
        tr_lo.append(cumulative[ell - 1] * k1_projected_trace)
        tr_hi.append(cumulative[ell - 1] * k1_trace)
        ratio_prod *= (op.lam2 / op.lam1) ** 2
        if r1 <= 0:
            r_lo.append(0.0)
        else:
            r_lo.append(1.0 / (1.0 + (1.0 / r1 - 1.0) * ratio_prod))
        if op.lam_min <= 0:
            vacuous = True
        else:
            spread_prod *= (op.lam1 / op.lam_min) ** 2
        r_hi.append(1.0 if vacuous else min(1.0, spread_prod * r1))
        vac.append(vacuous)
    return TheoryBounds(
        layers=tuple(layers),
        a=a,
        cumulative=cumulative,
        trace_lower=tuple(tr_lo),
        trace_upper=tuple(tr_hi),
        ratio_lower=tuple(r_lo),
        ratio_upper=tuple(r_hi),
        ratio_upper_vacuous=tuple(vac),
    )


def gradient_first_layer_traces(arch: Architecture) -> tuple[float, float]:
    """Exact (tr G_1, tr(G_1 projected)).

    The first layer is linear, so its Jacobian is the weight matrix and
    ``G_1 = C_W1 I`` on the |V| n0 input space; the top-eigenspace
    projector acts as Pi1 x identity.
    """
    cw1 = arch.weight_variances()[0]
    nv = arch.base_operator.num_vertices
    n0 = arch.input_dim
    d1 = arch.base_operator.top_multiplicity
    return cw1 * nv * n0, cw1 * d1 * n0


@dataclass(frozen=True)
class TraceRatioBounds:
    """Both readings of the per-layer trace ratio bracket.

    ``signed`` squares the algebraically extreme eigenvalues (lam_1,
    lam_|V|); ``absolute`` squares the extreme magnitudes, which is the
    operator-norm reading. The conservative corridor is their union and is
    what callers should test against.
    """

    layer: int
    signed: tuple[float, float]
    absolute: tuple[float, float]
    conservative: tuple[float, float]


def per_layer_trace_ratio_bounds(arch: Architecture, ell: int) -> TraceRatioBounds:
    """Bracket ``tr K_{l+1} / tr K_l`` by ``(1/2) C_W n [lam^2 extremes]``."""
    if not 1 <= ell <= arch.depth:
        raise ParameterError(f"layer {ell} outside 1..{arch.depth}")
    variances = arch.weight_variances()
    offset = 1 if arch.residual_mode else 0
    cw = variances[ell + offset]
    n = arch.hidden_widths[ell - 1]
    op = arch.operators[ell - 1]
    scale = 0.5 * cw * n
    w = op.eigenvalues
    signed = (scale * float(w[-1]) ** 2, scale * float(w[0]) ** 2)
    abs_w = np.abs(w)
    absolute = (scale * float(np.min(abs_w)) ** 2, scale * float(np.max(abs_w)) ** 2)
    conservative = (min(signed[0], absolute[0]), max(signed[1], absolute[1]))
    return TraceRatioBounds(
        layer=ell, signed=signed, absolute=absolute, conservative=conservative
    )


def os_ratio_corridor(
    spectra: list[tuple[float, float, float]], r1: float
) -> list[tuple[int, float, float, bool]]:
    """Per-layer (layer, lower, upper, upper_vacuous) for a fixed spectrum
    sequence, layer = 2..len(spectra)+1.

    ``spectra[l-1]`` holds (lam1, lam2, lam_min) of the operator applied in
    layer l. The upper bound is reported as 1 (vacuous) from the first
    layer whose lam_min <= 0 onward.
    """
    if not 0.0 < r1 <= 1.0:
        raise ParameterError(f"first-layer ratio must lie in (0, 1], got {r1}")
    rows = []
    ratio_prod = 1.0
    spread_prod = 1.0
    vacuous = False
    for ell, (lam1, lam2, lam_min) in enumerate(spectra, start=1):
        if lam1 <= 0:
            raise ParameterError(f"layer {ell}: lam1 must be positive, got {lam1}")
        ratio_prod *= (lam2 / lam1) ** 2
        lower = 1.0 / (1.0 + (1.0 / r1 - 1.0) * ratio_prod)
        if lam_min <= 0:
            vacuous = True
        else:
            spread_prod *= (lam1 / lam_min) ** 2
        upper = 1.0 if vacuous else min(1.0, spread_prod * r1)
        rows.append((ell + 1, lower, upper, vacuous))
    return rows


def residual_os_lower_bound(lam1: float, lam2: float, ts) -> float:
    """Depth-free lower bound for a residual family:
    ``(1 + exp[(lam2 - lam1)/max(1, lam1) * sum t])^{-1}``.

    Only the top two eigenvalues enter; positive definiteness is needed
    only for the upper bound.
    """
    if lam1 <= 0:
        raise ParameterError(f"lam1 must be positive, got {lam1}")
    if lam2 > lam1:
        raise ParameterError(f"need lam2 <= lam1, got {lam2} > {lam1}")
    total = float(np.sum(np.asarray(ts, dtype=np.float64)))
    return 1.0 / (1.0 + math.exp((lam2 - lam1) / max(1.0, lam1) * total))


@dataclass(frozen=True)
class ResidualCorridor:
    """Residual-family oversmoothing corridor.

    ``upper_literal`` is the corollary expression evaluated verbatim; its
    ``(1 - 1/r1)^{-1}`` factor is negative for r1 in (0, 1), which
    ``sign_flag`` records. ``upper_mapped`` re-derives the upper bound from
    the per-layer mapped spectra, which is the usable form.
    """

    lower: float
    upper_literal: float
    upper_mapped: float
    sign_flag: bool


def residual_os_corridor(
    lam1: float,
    lam2: float,
    lam_min: float,
    ts,
    r1: float,
) -> ResidualCorridor:
    """Corridor for the final-layer ratio of a residual aggregation family.

    Requires a positive definite base operator (lam_min > 0), matching the
    hypothesis of the statement it evaluates.
    """
    if lam_min <= 0:
        raise ParameterError(
            f"hypothesis violation: base operator must be positive definite, "
            f"lam_min = {lam_min}"
        )
    if not 0.0 < r1 <= 1.0:
        raise ParameterError(f"first-layer ratio must lie in (0, 1], got {r1}")
    ts = np.asarray(ts, dtype=np.float64)
    if np.any((ts < 0) | (ts > 1)):
        raise ParameterError("residual strengths must lie in [0, 1]")
    total = float(np.sum(ts))
    lower = residual_os_lower_bound(lam1, lam2, ts)
    exponent = (lam1 - lam_min) / min(1.0, lam_min) * total
    spread = math.exp(exponent) if exponent < 700 else math.inf
    sign_flag = r1 < 1.0
    literal = spread * (1.0 - 1.0 / r1) ** -1 if r1 < 1.0 else math.inf
    upper_literal = min(1.0, literal)
    mapped = [
        (1.0 + t * (lam1 - 1.0), 1.0 + t * (lam2 - 1.0), 1.0 + t * (lam_min - 1.0))
        for t in ts
    ]
    rows = os_ratio_corridor(mapped, r1)
    upper_mapped = rows[-1][2] if rows else min(1.0, r1)
    return ResidualCorridor(
        lower=lower,
        upper_literal=upper_literal,
        upper_mapped=upper_mapped,
        sign_flag=sign_flag,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo lemma harnesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaCheck:
    """One Monte-Carlo check: an estimate against its target value."""

    name: str
    estimate: float
    se: float
    target: float
    passed: bool


def _random_test_graph(num_vertices: int, seed: int, edge_prob: float = 0.4) -> Graph:
    gen = stream(seed, "lemma-graph")
    iu, ju = np.triu_indices(num_vertices, k=1)
    keep = gen.random(iu.shape[0]) < edge_prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    labels = gen.integers(0, 2, size=num_vertices)
    feats = gen.normal(size=(num_vertices, 4))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    return Graph(
        num_vertices=num_vertices,
        num_classes=2,
        edges=edges,
        features=feats,
        labels=labels,
    )


def _vectorized_layers(
    x: np.ndarray,
    P: np.ndarray,
    widths: list[int],
    variances: list[float],
    gen: np.random.Generator,
    chunk: int,
    store_activated: bool = False,
    tangent_at: tuple[int, int] | None = None,
):
    """Forward (and optionally tangent) pass for a whole chunk of draws.

    Yields per-layer arrays of shape (chunk, |V|, width). ``store_activated``
    swaps pre-activations for activations, the hook used to verify that an
    implementation bug of that kind is caught (the half-ratio becomes 1).
    """
    zs = []
    tangents = []
    z = None
    tangent = None
    for ell, (fan_out, var) in enumerate(zip(widths, variances)):
        fan_in = x.shape[1] if ell == 0 else widths[ell - 1]
        W = gen.normal(size=(chunk, fan_in, fan_out)) * math.sqrt(var)
        if ell == 0:
            z = np.matmul(x, W)
            if tangent_at is not None:
                u = np.zeros_like(x)
                u[tangent_at] = 1.0
                tangent = np.matmul(u, W)
        else:
            mask = z > 0
            z = np.matmul(P, np.matmul(np.maximum(z, 0.0), W))
            if tangent_at is not None:
                tangent = np.matmul(P, np.matmul(tangent * mask, W))
        zs.append(np.maximum(z, 0.0) if store_activated else z)
        if tangent_at is not None:
            tangents.append(tangent)
    return zs, tangents


def check_lemma_half(
    m: int,
    seed: int,
    depth: int = 4,
    num_vertices: int = 10,
    width: int = 8,
    tol_band: float = 0.005,
    store_activated: bool = False,
) -> list[LemmaCheck]:
    """Verify E[relu(z)^2] = E[z^2] / 2 per layer, and the same for the
    derivative with respect to one input coordinate (layers >= 2).

    Ratios aggregate over all (vertex, neuron) pairs of a layer, which the
    identity also covers; standard errors use the delta method over
    draws. ``store_activated`` is the injected-bug hook: storing
    activations as pre-activations drives the ratio to 1 and must fail.
    """
    if m < 1000:
        raise ParameterError(f"need at least 1e3 samples, got {m}")
    graph = _random_test_graph(num_vertices, seed)
    op = normalized_adjacency(graph, self_loops=True)
    x = graph.features
    widths = [width] * depth + [width]
    variances = [he_variance(x.shape[1], 1.0)] + [
        he_variance(width, op.lam1) for _ in range(depth)
    ]
    gen = stream(seed, "lemma-half")
    chunk = max(1, min(m, 20000 // max(num_vertices * width // 64, 1)))
    layer_sq = [[] for _ in widths]
    layer_act_sq = [[] for _ in widths]
    layer_tan_sq = [[] for _ in widths]
    layer_tan_act_sq = [[] for _ in widths]
    done = 0
    while done < m:
        c = min(chunk, m - done)
        zs, tangents = _vectorized_layers(
            x,
            op.matrix,
            widths,
            variances,
            gen,
            c,
            store_activated=store_activated,
            tangent_at=(0, 0),
        )
        for ell, z in enumerate(zs):
            layer_sq[ell].append(np.sum(z * z, axis=(1, 2)))
            layer_act_sq[ell].append(np.sum(np.maximum(z, 0.0) ** 2, axis=(1, 2)))
            t = tangents[ell]
            layer_tan_sq[ell].append(np.sum(t * t, axis=(1, 2)))
            layer_tan_act_sq[ell].append(np.sum((t * (z > 0)) ** 2, axis=(1, 2)))
        done += c
    checks = []
    for ell in range(len(widths)):
        num = np.concatenate(layer_act_sq[ell])
        den = np.concatenate(layer_sq[ell])
        ratio, se = ratio_mean_se(num, den)
        checks.append(
            LemmaCheck(
                name=f"half-value-layer-{ell + 1}",
                estimate=ratio,
                se=se,
                target=0.5,
                passed=abs(ratio - 0.5) <= max(tol_band, 3 * se),
            )
        )
        if ell >= 1:
            num = np.concatenate(layer_tan_act_sq[ell])
            den = np.concatenate(layer_tan_sq[ell])
            ratio, se = ratio_mean_se(num, den)
            checks.append(
                LemmaCheck(
                    name=f"half-derivative-layer-{ell + 1}",
                    estimate=ratio,
                    se=se,
                    target=0.5,
                    passed=abs(ratio - 0.5) <= max(tol_band, 3 * se),
                )
            )
    return checks


def check_sigma_trick(
    covariances: list[np.ndarray], m: int, seed: int
) -> list[LemmaCheck]:
    """Verify E[relu(z1) relu(z2)] >= K12 / 2 for jointly Gaussian pairs.

    One check per covariance matrix, with a 3-SE allowance. For diagonal
    input the estimate is additionally compared against the exact
    independent-case value sqrt(K11 K22) / (2 pi).
    """
    if m < 2:
        raise ParameterError(f"need at least 2 samples, got {m}")
    gen = stream(seed, "sigma-trick")
    checks = []
    for idx, K in enumerate(covariances):
        K = np.asarray(K, dtype=np.float64)
        if K.shape != (2, 2):
            raise ParameterError(f"covariance {idx} must be 2x2, got {K.shape}")
        if abs(K[0, 1] - K[1, 0]) > 1e-12 or np.any(np.linalg.eigvalsh(K) < -1e-12):
            raise ParameterError(f"covariance {idx} is not symmetric PSD")
        w, v = np.linalg.eigh(K)
        root = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
        z = gen.normal(size=(m, 2)) @ root.T
        prod = np.maximum(z[:, 0], 0.0) * np.maximum(z[:, 1], 0.0)
        est = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / math.sqrt(m))
        target = 0.5 * float(K[0, 1])
        checks.append(
            LemmaCheck(
                name=f"sigma-trick-{idx}",
                estimate=est,
                se=se,
                target=target,
                passed=est >= target - 3 * se,
            )
        )
        if K[0, 1] == 0.0:
            exact = math.sqrt(K[0, 0] * K[1, 1]) / (2.0 * math.pi)
            checks.append(
                LemmaCheck(
                    name=f"sigma-trick-{idx}-independent-exact",
                    estimate=est,
                    se=se,
                    target=exact,
                    passed=abs(est - exact) <= 3 * se,
                )
            )
    return checks
