"""Graph construction: synthetic two-block random graphs, vertex features,
train/val/test splits, and a versioned text file format.

The graph model used throughout is the symmetric stochastic block model:
``n`` vertices assigned to ``k`` classes uniformly at random, an edge drawn
between same-class vertices with probability ``a*log(n)/n`` and between
cross-class vertices with probability ``b*log(n)/n``. With ``k = 2`` the
communities are exactly recoverable iff ``|sqrt(a) - sqrt(b)| > sqrt(2)``.

Graphs are immutable value objects; every constructor validates the full
set of invariants (no self-loops, deduplicated edges, labels in range,
pairwise-disjoint masks, finite features).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GraphFormatError, ParameterError
from .rng import stream

FILE_FORMAT_NAME = "gnnlab-graph"
FILE_FORMAT_VERSION = 1


class Recovery(enum.Enum):
    """Community recoverability regime of a two-block model."""

    EXACT = "exact"
    NONE = "none"


def recovery_regime(a: float, b: float) -> Recovery:
    """Exact recovery holds iff |sqrt(a) - sqrt(b)| > sqrt(2)."""
    if a < 0 or b < 0:
        raise ParameterError(f"edge-density coefficients must be nonnegative, got a={a}, b={b}")
    if abs(math.sqrt(a) - math.sqrt(b)) > math.sqrt(2.0):
        return Recovery.EXACT
    return Recovery.NONE


@dataclass(frozen=True)
class SSBMParams:
    """Parameters of a symmetric stochastic block model draw."""

    n: int
    a: float
    b: float
    seed: int
    k: int = 2

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"vertex count must be positive, got n={self.n}")
        if self.k != 2:
            raise ParameterError(f"only two-class models are supported, got k={self.k}")
        if not (self.a >= self.b >= 0):
            raise ParameterError(f"need a >= b >= 0, got a={self.a}, b={self.b}")
        if self.p_in > 1.0 or self.p_out > 1.0:
            raise ParameterError(
                f"edge probabilities exceed 1: p_in={self.p_in:.4g}, p_out={self.p_out:.4g}"
            )

    @property
    def p_in(self) -> float:
        return self.a * math.log(self.n) / self.n if self.n > 1 else 0.0

    @property
    def p_out(self) -> float:
        return self.b * math.log(self.n) / self.n if self.n > 1 else 0.0


@dataclass(frozen=True)
class Masks:
    """Pairwise-disjoint boolean train/val/test vertex masks."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __iter__(self):
        return iter((self.train, self.val, self.test))


@dataclass(frozen=True)
class Graph:
    """An undirected vertex-labeled graph with features and split masks.

    ``edges`` is an ``(m, 2)`` int array of deduplicated pairs ``u < v``;
    self-loops are never stored (operator construction adds them).
    ``features`` has one row per vertex, ``labels`` holds class ids in
    ``[0, num_classes)``.
    """

    num_vertices: int
    num_classes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    masks: Masks = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        n = self.num_vertices
        if n < 1:
            raise GraphFormatError(f"num_vertices: must be positive, got {n}")
        if self.num_classes < 1:
            raise GraphFormatError(f"num_classes: must be positive, got {self.num_classes}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise GraphFormatError(
                    f"edges: vertex index out of range [0, {n}), got "
                    f"[{edges.min()}, {edges.max()}]"
                )
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphFormatError("edges: self-loop pairs are not allowed")
        canon = np.sort(edges, axis=1)
        canon = np.unique(canon, axis=0) if canon.size else canon
        object.__setattr__(self, "edges", canon)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise GraphFormatError(
                f"features: expected shape ({n}, n0), got {feats.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise GraphFormatError("features: non-finite entries")
        object.__setattr__(self, "features", feats)
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise GraphFormatError(f"labels: expected {n} entries, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise GraphFormatError(
                f"labels: class id out of range [0, {self.num_classes}), got "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", labels)
        masks = self.masks
        if masks is None:
            zeros = np.zeros(n, dtype=bool)
            masks = Masks(zeros, zeros.copy(), zeros.copy())
        arrs = []
        for name, m in zip(("train", "val", "test"), masks):
            m = np.asarray(m, dtype=bool)
            if m.shape != (n,):
                raise GraphFormatError(f"masks.{name}: expected {n} entries, got {m.shape}")
            arrs.append(m)
        if np.any(arrs[0] & arrs[1]) or np.any(arrs[0] & arrs[2]) or np.any(arrs[1] & arrs[2]):
            raise GraphFormatError("masks: train/val/test must be pairwise disjoint")
        object.__setattr__(self, "masks", Masks(*arrs))

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_vertices, dtype=np.int64)
        if self.num_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg


def expected_edge_count(params: SSBMParams, labels: np.ndarray) -> tuple[float, float]:
    """Mean and standard deviation of the undirected edge count given labels.

    This is the pair-sum binomial oracle: each same-class pair is an
    independent Bernoulli(p_in), each cross-class pair a Bernoulli(p_out).
    """
    counts = np.bincount(labels, minlength=params.k).astype(float)
    in_pairs = float(np.sum(counts * (counts - 1) / 2.0))
    all_pairs = params.n * (params.n - 1) / 2.0
    cross_pairs = all_pairs - in_pairs
    mean = in_pairs * params.p_in + cross_pairs * params.p_out
    var = in_pairs * params.p_in * (1 - params.p_in) + cross_pairs * params.p_out * (
        1 - params.p_out
    )
    return mean, math.sqrt(var)


def generate_ssbm(params: SSBMParams) -> Graph:
    """Draw a two-block graph; deterministic for a given seed.

    Features are a placeholder zero column until ``synthesize_features``
    (or a loader) attaches real ones.
    """
    gen = stream(params.seed, "ssbm-labels")
    labels = gen.integers(0, params.k, size=params.n)
    egen = stream(params.seed, "ssbm-edges")
    iu, ju = np.triu_indices(params.n, k=1)
    prob = np.where(labels[iu] == labels[ju], params.p_in, params.p_out)
    keep = egen.random(iu.shape[0]) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return Graph(
        num_vertices=params.n,
        num_classes=params.k,
        edges=edges,
        features=np.zeros((params.n, 1)),
        labels=labels,
    )


def synthesize_features(
    graph: Graph, n0: int, class_separation: float, seed: int
) -> Graph:
    """Attach Gaussian class-mean features, one unit-norm row per vertex.

    Class means form a regular simplex with pairwise distance
    ``class_separation`` in a random orientation; each row is the class
    mean plus unit-covariance noise, then L2-normalized to ``|x_v| = 1``.
    With separation 0 the features carry no label information.
    """
    if n0 < 1:
        raise ParameterError(f"feature dimension must be >= 1, got {n0}")
    if class_separation < 0:
        raise ParameterError(f"class separation must be >= 0, got {class_separation}")
    k = graph.num_classes
    if n0 < k - 1:
        raise ParameterError(f"need n0 >= k-1 to separate {k} classes, got n0={n0}")
    gen = stream(seed, "features")
    # Random orthonormal frame carrying a centered regular simplex.
    basis, _ = np.linalg.qr(gen.normal(size=(n0, max(k - 1, 1))))
    simplex = np.eye(k) - 1.0 / k
    # Rows of `simplex` have pairwise distance sqrt(2); embed in k-1 dims.
    u, s, _ = np.linalg.svd(simplex, full_matrices=False)
    coords = (u[:, : k - 1] * s[: k - 1]) if k > 1 else np.zeros((1, 1))
    coords = coords * (class_separation / math.sqrt(2.0))
    means = coords @ basis.T[: k - 1] if k > 1 else np.zeros((1, n0))
    x = means[graph.labels] + gen.normal(size=(graph.num_vertices, n0))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    x = x / norms
    return replace(graph, features=x)


def split_vertices(
    graph: Graph, fractions: tuple[float, float, float], seed: int
) -> Masks:
    """Uniformly random disjoint masks with floor-rounded cardinalities.

    Rounding losses relative to ``n * sum(fractions)`` are assigned to the
    train mask.
    """
    if any(f < 0 for f in fractions):
        raise ParameterError(f"fractions must be nonnegative, got {fractions}")
    if sum(fractions) > 1.0 + 1e-12:
        raise ParameterError(f"fractions must sum to at most 1, got {fractions}")
    n = graph.num_vertices
    sizes = [int(f * n) for f in fractions]
    target = int(round(sum(fractions) * n))
    sizes[0] += max(target - sum(sizes), 0)
    order = stream(seed, "split").permutation(n)
    masks = []
    start = 0
    for size in sizes:
        m = np.zeros(n, dtype=bool)
        m[order[start : start + size]] = True
        masks.append(m)
        start += size
    return Masks(*masks)


def with_masks(graph: Graph, masks: Masks) -> Graph:
    return replace(graph, masks=masks)


# ---------------------------------------------------------------------------
# File format. Versioned structured text, one logical section per line group:
#
#   gnnlab-graph 1
#   vertices <n>
#   features <n0>
#   classes <k>
#   edges <m>
#   <u> <v>          (m lines, 0-based, u < v)
#   features-begin
#   <x_1 ... x_n0>   (n lines of decimal reals)
#   labels
#   <c_1 ... c_n>    (single line of ints in [0, k))
#   mask-train
#   <0/1 ... >       (single line, n entries; same for mask-val, mask-test)
#
# Loaders reject unknown versions and name the offending field on error.
# ---------------------------------------------------------------------------


def save_graph(graph: Graph, path) -> None:
    lines = [f"{FILE_FORMAT_NAME} {FILE_FORMAT_VERSION}"]
    lines.append(f"vertices {graph.num_vertices}")
    lines.append(f"features {graph.num_features}")
    lines.append(f"classes {graph.num_classes}")
    lines.append(f"edges {graph.num_edges}")
    for u, v in graph.edges:
        lines.append(f"{u} {v}")
    lines.append("features-begin")
    for row in graph.features:
        lines.append(" ".join(repr(float(x)) for x in row))
    lines.append("labels")
    lines.append(" ".join(str(int(c)) for c in graph.labels))
    for name, mask in zip(("train", "val", "test"), graph.masks):
        lines.append(f"mask-{name}")
        lines.append(" ".join("1" if b else "0" for b in mask))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


class _Cursor:
    def __init__(self, lines: list[str]):
        self.lines = lines
        self.pos = 0

    def next(self, field: str) -> str:
        if self.pos >= len(self.lines):
            raise GraphFormatError(f"{field}: unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line


def _parse_int(token: str, field: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"{field}: expected integer, got {token!r}") from None


def _header_int(cur: _Cursor, key: str) -> int:
    line = cur.next(key).split()
    if len(line) != 2 or line[0] != key:
        raise GraphFormatError(f"{key}: malformed header line {' '.join(line)!r}")
    return _parse_int(line[1], key)


def load_graph(path) -> Graph:
    """Parse a graph file, validating every invariant on the way in."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    cur = _Cursor(lines)
    magic = cur.next("header").split()
    if len(magic) != 2 or magic[0] != FILE_FORMAT_NAME:
        raise GraphFormatError(f"header: not a {FILE_FORMAT_NAME} file")
    if _parse_int(magic[1], "version") != FILE_FORMAT_VERSION:
        raise GraphFormatError(f"version: unsupported version {magic[1]}")
    n = _header_int(cur, "vertices")
    n0 = _header_int(cur, "features")
    k = _header_int(cur, "classes")
    m = _header_int(cur, "edges")
    edges = np.zeros((m, 2), dtype=np.int64)
    for i in range(m):
        toks = cur.next("edges").split()
        if len(toks) != 2:
            raise GraphFormatError(f"edges: line {i} must hold two indices, got {toks!r}")
        edges[i] = [_parse_int(toks[0], "edges"), _parse_int(toks[1], "edges")]
    if cur.next("features-begin") != "features-begin":
        raise GraphFormatError("features-begin: marker missing")
    feats = np.zeros((n, n0))
    for i in range(n):
        toks = cur.next("features").split()
        if len(toks) != n0:
            raise GraphFormatError(
                f"features: row {i} has {len(toks)} values, expected {n0}"
            )
        try:
            feats[i] = [float(t) for t in toks]
        except ValueError:
            raise GraphFormatError(f"features: row {i} holds a non-numeric value") from None
    if cur.next("labels") != "labels":
        raise GraphFormatError("labels: marker missing")
    toks = cur.next("labels").split()
    if len(toks) != n:
        raise GraphFormatError(f"labels: expected {n} entries, got {len(toks)}")
    labels = np.array([_parse_int(t, "labels") for t in toks], dtype=np.int64)
    mask_arrays = []
    for name in ("train", "val", "test"):
        if cur.next(f"mask-{name}") != f"mask-{name}":
            raise GraphFormatError(f"mask-{name}: marker missing")
        toks = cur.next(f"mask-{name}").split()
        if len(toks) != n:
            raise GraphFormatError(f"mask-{name}: expected {n} entries, got {len(toks)}")
        if any(t not in ("0", "1") for t in toks):
            raise GraphFormatError(f"mask-{name}: entries must be 0 or 1")
        mask_arrays.append(np.array([t == "1" for t in toks]))
    return Graph(
        num_vertices=n,
        num_classes=k,
        edges=edges,
        features=feats,
        labels=labels,
        masks=Masks(*mask_arrays),
    )
