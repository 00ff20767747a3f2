"""Aggregation operators and their spectral structure.

An aggregation operator is a symmetric entrywise-nonnegative matrix that
mixes vertex features once per network layer; the canonical instance is
the symmetric degree-normalized adjacency with self-loops,
``D^{-1/2} (A + I) D^{-1/2}``, whose largest eigenvalue is exactly 1 on
every connected graph. Each operator caches its full eigendecomposition,
the multiplicity of the top eigenvalue, and the orthogonal projector onto
the top eigenspace, which downstream diagnostics use to measure how much
of the signal has collapsed onto the smoothest modes.

Residual interpolation ``(1 - t) I + t P`` shares eigenvectors with ``P``
and maps each eigenvalue lambda to ``1 + t (lambda - 1)``; for ``t > 0``
the top eigenspace is unchanged, so a whole residual family satisfies the
shared-top-eigenspace requirement by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .errors import NumericError, ParameterError
from .graphs import Graph
from . import kernels

SYMMETRY_TOL = 1e-12
ENTRY_TOL = -1e-14
GROUP_TOL = 1e-8
PROJECTOR_TOL = 1e-10
RECONSTRUCT_TOL = 1e-9
# Dense-apply is cheaper than CSR once the matrix stops being sparse.
SPARSE_DENSITY_CUTOFF = 0.25
# Cyclic Jacobi is O(n^3) with a large constant; past these sizes the
# LAPACK driver is orders of magnitude faster (see benchmarks/bench_eig.py)
# and `auto` switches over.
JACOBI_AUTO_MAX = {"cython": 256, "numpy": 96}


def eigendecompose(
    matrix: np.ndarray,
    tol: float = RECONSTRUCT_TOL,
    method: str = "auto",
    max_sweeps: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Full symmetric eigendecomposition, eigenvalues sorted descending.

    ``method`` is one of ``auto``, ``jacobi``, ``jacobi-numpy``, ``lapack``.
    ``auto`` runs the cyclic Jacobi kernel (compiled when available, NumPy
    twin otherwise) up to a size cutoff and the LAPACK driver beyond it.
    The residual ``|A v - lambda v| <= tol * |lambda|_max`` is verified per
    pair regardless of backend.
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > SYMMETRY_TOL * scale * A.shape[0]:
        raise ParameterError("matrix is not symmetric to tolerance")
    if method == "auto":
        if A.shape[0] <= JACOBI_AUTO_MAX[kernels.JACOBI_BACKEND]:
            method = "jacobi" if kernels.JACOBI_BACKEND == "cython" else "jacobi-numpy"
        else:
            method = "lapack"
    if method == "jacobi":
        w, v, sweeps, off = kernels.jacobi_eigh(A, 1e-12, max_sweeps)
        if sweeps >= max_sweeps and off > 1e-12 * max(np.linalg.norm(A), 1e-300):
            raise NumericError(
                f"jacobi sweeps exhausted ({max_sweeps}); off-diagonal norm {off:.3e}"
            )
    elif method == "jacobi-numpy":
        w, v, sweeps, off = kernels.jacobi_eigh_numpy(A, 1e-12, max_sweeps)
        if sweeps >= max_sweeps and off > 1e-12 * max(np.linalg.norm(A), 1e-300):
            raise NumericError(
                f"jacobi sweeps exhausted ({max_sweeps}); off-diagonal norm {off:.3e}"
            )
    elif method == "lapack":
        w, v = np.linalg.eigh(A)
    else:
        raise ParameterError(f"unknown eigendecomposition method {method!r}")
    order = np.argsort(-w, kind="stable")
    w = np.ascontiguousarray(w[order])
    v = np.ascontiguousarray(v[:, order])
    spectral_scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)
    residual = np.max(np.abs(A @ v - v * w[None, :]))
    if residual > tol * spectral_scale * 10:
        raise NumericError(
            f"eigenpair residual {residual:.3e} exceeds {tol:.1e} * |lambda|"
        )
    return w, v


def _top_group_size(eigenvalues: np.ndarray, group_tol: float) -> int:
    lam1 = eigenvalues[0]
    gap = group_tol * max(1.0, abs(lam1))
    return int(np.sum(lam1 - eigenvalues <= gap))


@dataclass(frozen=True)
class AggregationOperator:
    """Symmetric nonnegative mixing matrix with cached spectral data."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    top_multiplicity: int
    projector: np.ndarray
    _apply_matrix: object = field(repr=False, default=None)

    @classmethod
    def from_matrix(
        cls,
        matrix: np.ndarray,
        group_tol: float = GROUP_TOL,
        method: str = "auto",
        validate: bool = True,
    ) -> "AggregationOperator":
        M = np.asarray(matrix, dtype=np.float64)
        if validate:
            scale = float(np.max(np.abs(M))) if M.size else 0.0
            if scale > 0 and np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
                raise ParameterError("aggregation operator must be symmetric")
            if np.min(M) < ENTRY_TOL:
                raise ParameterError(
                    f"aggregation operator entries must be nonnegative, min={np.min(M):.3e}"
                )
        M = 0.5 * (M + M.T)
        w, v = eigendecompose(M, method=method)
        return cls._from_decomposition(M, w, v, group_tol)

    @classmethod
    def _from_decomposition(cls, M, w, v, group_tol=GROUP_TOL) -> "AggregationOperator":
        d1 = _top_group_size(w, group_tol)
        top = v[:, :d1]
        projector = top @ top.T
        projector = 0.5 * (projector + projector.T)
        density = np.count_nonzero(M) / max(M.size, 1)
        apply_matrix = (
            scipy.sparse.csr_matrix(M) if density < SPARSE_DENSITY_CUTOFF else None
        )
        return cls(
            matrix=M,
            eigenvalues=w,
            eigenvectors=v,
            top_multiplicity=d1,
            projector=projector,
            _apply_matrix=apply_matrix,
        )

    @property
    def num_vertices(self) -> int:
        return self.matrix.shape[0]

    @property
    def lam1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam2(self) -> float:
        """Largest eigenvalue strictly below the top group (lam1 if none)."""
        if self.top_multiplicity >= len(self.eigenvalues):
            return float(self.eigenvalues[0])
        return float(self.eigenvalues[self.top_multiplicity])

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def top_basis(self) -> np.ndarray:
        return self.eigenvectors[:, : self.top_multiplicity]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Compute ``P @ X``, using a cached sparse form when profitable."""
        if self._apply_matrix is not None:
            return self._apply_matrix @ X
        return self.matrix @ X


def normalized_adjacency(
    graph: Graph, self_loops: bool = True, strict: bool = False, method: str = "auto"
) -> AggregationOperator:
    """Symmetric degree-normalized adjacency ``D^{-1/2} (A + s I) D^{-1/2}``.

    ``D`` is the diagonal of row sums of ``A + s I``. Vertices with zero
    degree and no self-loop get an all-zero row and column; with
    ``strict=True`` they raise instead.
    """
    n = graph.num_vertices
    A = np.zeros((n, n))
    if graph.num_edges:
        A[graph.edges[:, 0], graph.edges[:, 1]] = 1.0
        A[graph.edges[:, 1], graph.edges[:, 0]] = 1.0
    if self_loops:
        A[np.diag_indices(n)] += 1.0
    deg = A.sum(axis=1)
    if strict and np.any(deg == 0):
        isolated = int(np.argmax(deg == 0))
        raise NumericError(
            f"vertex {isolated} has zero degree; add self-loops or drop strict mode"
        )
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    P = inv_sqrt[:, None] * A * inv_sqrt[None, :]
    return AggregationOperator.from_matrix(P, method=method)


def residual_operator(op: AggregationOperator, t: float) -> AggregationOperator:
    """Interpolation ``(1 - t) I + t P``; eigenvectors are shared with ``P``.

    Eigenvalues map affinely to ``1 + t (lambda - 1)``; for ``t = 0`` every
    eigenvalue is 1 and the top eigenspace degenerates to the whole space,
    which ``assert_assumptions`` flags.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"residual strength must be in [0, 1], got {t}")
    n = op.num_vertices
    M = t * op.matrix + (1.0 - t) * np.eye(n)
    w = 1.0 + t * (op.eigenvalues - 1.0)
    # The affine map is monotone, so the descending order is preserved.
    return AggregationOperator._from_decomposition(M, w, op.eigenvectors)


@dataclass(frozen=True)
class ResidualSchedule:
    """Per-layer residual aggregation strengths ``t_l`` in [0, 1]."""

    ts: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not 0.0 <= t <= 1.0 for t in self.ts):
            raise ParameterError(f"residual strengths must lie in [0, 1], got {self.ts}")

    @classmethod
    def constant(cls, t: float, depth: int) -> "ResidualSchedule":
        return cls(tuple([t] * depth))

    @classmethod
    def total(cls, total: float, depth: int) -> "ResidualSchedule":
        """Strengths ``total / depth`` per layer, keeping the sum fixed."""
        return cls.constant(total / depth, depth)

    @property
    def sum(self) -> float:
        return float(sum(self.ts))


def top_projector(
    eigenvalues: np.ndarray, eigenvectors: np.ndarray, group_tol: float = GROUP_TOL
) -> np.ndarray:
    """Projector onto the eigenspace of all eigenvalues within
    ``group_tol * max(1, |lam1|)`` of the largest one."""
    d1 = _top_group_size(np.asarray(eigenvalues), group_tol)
    top = np.asarray(eigenvectors)[:, :d1]
    pi = top @ top.T
    return 0.5 * (pi + pi.T)


def positivity_components(matrix: np.ndarray, tol: float = 0.0) -> list[np.ndarray]:
    """Connected components of the positivity pattern ``matrix > tol``."""
    n = matrix.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            u = stack.pop()
            members.append(u)
            neighbors = np.flatnonzero(matrix[u] > tol)
            for v in neighbors:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(np.array(sorted(members), dtype=np.int64))
    return comps


def perron_basis(op: AggregationOperator, sign_tol: float = PROJECTOR_TOL) -> np.ndarray:
    """Orthonormal nonnegative basis of the top eigenspace.

    One vector per positivity-pattern connected component that attains the
    global top eigenvalue; each is that component's Perron vector, so the
    supports are disjoint and orthonormality is automatic. Raises when a
    sign-normalized vector still has an entry below ``-sign_tol``.
    """
    comps = positivity_components(op.matrix)
    vectors = []
    for comp in comps:
        # Projection of the component indicator onto the top eigenspace is
        # the component's Perron vector when the component attains lam1.
        indicator = np.zeros(op.num_vertices)
        indicator[comp] = 1.0
        proj = op.top_basis @ (op.top_basis.T @ indicator)
        norm = np.linalg.norm(proj)
        if norm <= 1e-8:
            continue
        vec = proj / norm
        if vec.sum() < 0:
            vec = -vec
        if np.min(vec) < -sign_tol:
            raise NumericError(
                f"Perron vector sign condition breached: min entry {np.min(vec):.3e}"
            )
        vec = np.where(np.abs(vec) < sign_tol, np.maximum(vec, 0.0), vec)
        vectors.append(vec)
    basis = np.stack(vectors, axis=1) if vectors else np.zeros((op.num_vertices, 0))
    if basis.shape[1] != op.top_multiplicity:
        raise NumericError(
            f"found {basis.shape[1]} Perron vectors for top multiplicity "
            f"{op.top_multiplicity}"
        )
    return basis


def interference_bound(op: AggregationOperator) -> float:
    """Largest off-diagonal entry of ``I - pi1 pi1^T``.

    Requires a one-dimensional top eigenspace with Perron vector ``pi1``;
    the entry at ``(u, v)`` equals ``-(pi1)_u (pi1)_v``, so the maximum is
    at most ``-min_v (pi1)_v ** 2``, which is asserted to tolerance.
    """
    if op.top_multiplicity != 1:
        raise ParameterError(
            f"interference bound needs a 1-dimensional top eigenspace, got "
            f"multiplicity {op.top_multiplicity}"
        )
    pi1 = perron_basis(op)[:, 0]
    complement = np.eye(op.num_vertices) - np.outer(pi1, pi1)
    off = complement - np.diag(np.diag(complement))
    np.fill_diagonal(off, -np.inf)
    bound = float(np.max(off))
    delta = float(np.min(pi1**2))
    if bound > -delta + 1e-10:
        raise NumericError(
            f"interference bound {bound:.3e} exceeds -delta={-delta:.3e} + 1e-10"
        )
    return bound


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the per-layer operator checks."""

    symmetric: tuple[bool, ...]
    nonnegative: tuple[bool, ...]
    shared_top_eigenspace: tuple[bool, ...]
    degenerate_top: tuple[bool, ...]  # top eigenspace is the whole space (t = 0)

    @property
    def all_pass(self) -> bool:
        return (
            all(self.symmetric)
            and all(self.nonnegative)
            and all(self.shared_top_eigenspace)
        )


def assert_assumptions(operators: list[AggregationOperator]) -> AssumptionReport:
    """Verify symmetry, nonnegativity, and a shared top eigenspace.

    Layers whose top eigenspace is the whole space (identity operators,
    residual strength 0) are flagged separately rather than silently
    passing the shared-eigenspace check.
    """
    if not operators:
        raise ParameterError("need at least one operator")
    sym, nonneg, shared, degen = [], [], [], []
    reference = operators[0].projector
    for op in operators:
        scale = max(float(np.max(np.abs(op.matrix))), 1e-300)
        sym.append(bool(np.max(np.abs(op.matrix - op.matrix.T)) <= SYMMETRY_TOL * scale))
        nonneg.append(bool(np.min(op.matrix) >= ENTRY_TOL))
        shared.append(bool(np.max(np.abs(op.projector - reference)) <= 1e-8))
        degen.append(bool(op.top_multiplicity == op.num_vertices))
    return AssumptionReport(
        symmetric=tuple(sym),
        nonnegative=tuple(nonneg),
        shared_top_eigenspace=tuple(shared),
        degenerate_top=tuple(degen),
    )


def spectrum_csv_rows(op: AggregationOperator) -> list[tuple[int, float]]:
    """(index, eigenvalue) rows for the CLI spectrum dump."""
    return [(j, float(lam)) for j, lam in enumerate(op.eigenvalues)]
