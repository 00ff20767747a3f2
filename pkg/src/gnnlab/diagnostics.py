"""Monte-Carlo estimation of the three failure-mode metrics.

Everything here averages over the random-weight prior of an architecture:

* pre-activation covariances ``K_l = E[z_i z_i^T]`` (one neuron column,
  identical across neurons by exchangeability) and their traces;
* output distortion, the per-vertex ratio of mean squared final-hidden
  activations to mean squared inputs, whose exponential growth or decay in
  depth is the first failure mode;
* the oversmoothing ratio ``r_l = tr(K_l Pi1) / tr(K_l)``, the fraction of
  second-moment mass inside the top eigenspace of the aggregation
  operators, and the rate ``-log(1 - r_L)``;
* the class condition number of class-averaged final-hidden features,
  whose divergence signals correlation collapse;
* traces of the input-output Jacobian covariances, the gradient-side twin
  of the trace story.

Estimators report standard errors from the across-draw spread; ratio
standard errors use the delta method. Streaming accumulation is
compensated (Neumaier) so results do not depend on accumulation order
beyond 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import Architecture, ForwardTrace, forward, init_weights, input_jacobian_rows
from .errors import NumericError, ParameterError
from .rng import stream


class NeumaierSum:
    """Compensated accumulator; order-independent to ~1 ulp."""

    def __init__(self) -> None:
        self.total = 0.0
        self.compensation = 0.0
        self.count = 0

    def add(self, value: float) -> None:
        t = self.total + value
        if abs(self.total) >= abs(value):
            self.compensation += (self.total - t) + value
        else:
            self.compensation += (value - t) + self.total
        self.total = t
        self.count += 1

    @property
    def value(self) -> float:
        return self.total + self.compensation

    @property
    def mean(self) -> float:
        return self.value / self.count if self.count else math.nan


def ratio_mean_se(
    numerators: np.ndarray, denominators: np.ndarray
) -> tuple[float, float]:
    """Mean ratio ``E[num]/E[den]`` and its delta-method standard error."""
    num = np.asarray(numerators, dtype=np.float64)
    den = np.asarray(denominators, dtype=np.float64)
    m = len(num)
    nbar, dbar = float(np.mean(num)), float(np.mean(den))
    if dbar <= 0:
        raise NumericError(f"degenerate denominator mean {dbar:.3e}")
    r = nbar / dbar
    if m < 2:
        return r, math.inf
    cov = np.cov(num, den, ddof=1)
    var = (
        cov[0, 0] / dbar**2
        + nbar**2 * cov[1, 1] / dbar**4
        - 2.0 * nbar * cov[0, 1] / dbar**3
    ) / m
    return r, math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class CovarianceEstimate:
    """Monte-Carlo estimate of one layer's pre-activation covariance."""

    layer: int
    matrix: np.ndarray
    num_samples: int
    trace: float
    trace_se: float
    projected_trace: float
    projected_trace_se: float


def exact_first_layer_cov(arch: Architecture, x: np.ndarray) -> np.ndarray:
    """Closed form ``K_1 = C_W1 * x x^T`` (first layer is linear in x)."""
    cw1 = arch.weight_variances()[0]
    x = np.asarray(x, dtype=np.float64)
    return cw1 * (x @ x.T)


def estimate_covariances(
    arch: Architecture,
    x: np.ndarray,
    layers: tuple[int, ...],
    m: int,
    seed: int,
) -> list[CovarianceEstimate]:
    """Average ``z_i z_i^T`` over ``m`` weight draws and all neurons.

    Exchangeability across neurons makes every column an estimate of the
    same covariance, so one draw contributes ``z z^T / n_layer``.
    """
    if m < 2:
        raise ParameterError(f"need at least 2 samples, got {m}")
    layers = tuple(sorted(set(layers)))
    _validate_layers(arch, layers)
    nv = arch.base_operator.num_vertices
    pi_basis = arch.base_operator.top_basis
    sums = {ell: np.zeros((nv, nv)) for ell in layers}
    traces = {ell: np.zeros(m) for ell in layers}
    proj = {ell: np.zeros(m) for ell in layers}
    for s in range(m):
        state = init_weights(arch, seed=draw_seed(seed, s))
        trace = forward(state, arch, x)
        for ell in layers:
            z = trace.layer(ell)
            width = z.shape[1]
            sums[ell] += (z @ z.T) / width
            traces[ell][s] = np.sum(z * z) / width
            proj[ell][s] = np.sum((pi_basis.T @ z) ** 2) / width
    out = []
    for ell in layers:
        k_hat = sums[ell] / m
        k_hat = 0.5 * (k_hat + k_hat.T)
        tr, tr_se = float(np.mean(traces[ell])), float(np.std(traces[ell], ddof=1) / math.sqrt(m))
        pt, pt_se = float(np.mean(proj[ell])), float(np.std(proj[ell], ddof=1) / math.sqrt(m))
        out.append(
            CovarianceEstimate(
                layer=ell,
                matrix=k_hat,
                num_samples=m,
                trace=tr,
                trace_se=tr_se,
                projected_trace=pt,
                projected_trace_se=pt_se,
            )
        )
    return out


def draw_seed(seed: int, index: int) -> int:
    """Child seed for ensemble member ``index`` of a Monte-Carlo run."""
    gen = stream(seed, "mc-draw", index)
    return int(gen.integers(0, 2**63 - 1))


def _validate_layers(arch: Architecture, layers: tuple[int, ...]) -> None:
    for ell in layers:
        if not 1 <= ell <= arch.depth + 1:
            raise ParameterError(
                f"layer {ell} outside 1..{arch.depth + 1} for depth {arch.depth}"
            )


def output_distortion(trace: ForwardTrace, x: np.ndarray, vertex: int) -> float:
    """Relative squared scale of the final hidden layer at one vertex:
    ``(|z_v|^2 / n_L) / (|x_v|^2 / n_0)``."""
    x = np.asarray(x, dtype=np.float64)
    x_norm2 = float(np.sum(x[vertex] ** 2))
    if x_norm2 <= 0:
        raise NumericError(f"vertex {vertex} has zero input norm; distortion undefined")
    z = trace.pre[-1]
    return float(np.sum(z[vertex] ** 2) / z.shape[1] / (x_norm2 / x.shape[1]))


@dataclass(frozen=True)
class DistortionSummary:
    """Distortion over vertices x initializations at one depth."""

    depth: int
    mean: float
    se: float  # across-initialization standard error of the mean
    q10: float
    q90: float
    num_samples: int


def distortion_profile(
    arch: Architecture, x: np.ndarray, m: int, seed: int
) -> DistortionSummary:
    """Ensemble mean/quantiles of per-vertex distortion at the final
    hidden layer; the SE comes from the spread of per-init vertex means."""
    if m < 2:
        raise ParameterError(f"need at least 2 samples, got {m}")
    x = np.asarray(x, dtype=np.float64)
    x_norm2 = np.sum(x * x, axis=1)
    if np.any(x_norm2 <= 0):
        raise NumericError("zero-norm input rows make distortion undefined")
    per_init = np.zeros(m)
    all_vals = []
    for s in range(m):
        state = init_weights(arch, seed=draw_seed(seed, s))
        z = forward(state, arch, x).pre[-1]
        vals = (np.sum(z * z, axis=1) / z.shape[1]) / (x_norm2 / x.shape[1])
        per_init[s] = vals.mean()
        all_vals.append(vals)
    pooled = np.concatenate(all_vals)
    return DistortionSummary(
        depth=arch.depth,
        mean=float(per_init.mean()),
        se=float(per_init.std(ddof=1) / math.sqrt(m)),
        q10=float(np.quantile(pooled, 0.10)),
        q90=float(np.quantile(pooled, 0.90)),
        num_samples=m,
    )


def oversmoothing_ratio(k_hat: np.ndarray, projector: np.ndarray) -> float:
    """Trace form ``r = tr(K Pi1) / tr(K)``; flags values outside [0, 1]
    by more than 1e-6 (possible with Monte-Carlo noise only)."""
    k_hat = np.asarray(k_hat, dtype=np.float64)
    total = float(np.trace(k_hat))
    if total <= 0:
        raise NumericError(f"covariance trace {total:.3e} is not positive")
    r = float(np.trace(k_hat @ projector)) / total
    if not -1e-6 <= r <= 1 + 1e-6:
        raise NumericError(f"oversmoothing ratio {r} outside [0, 1] beyond tolerance")
    return min(max(r, 0.0), 1.0)


def oversmoothing_rate(r: float) -> float:
    """``-log(1 - r)``; +inf when r >= 1."""
    if not 0.0 <= r <= 1.0 + 1e-12:
        raise ParameterError(f"ratio must lie in [0, 1], got {r}")
    if r >= 1.0:
        return math.inf
    return -math.log1p(-r)


@dataclass(frozen=True)
class OversmoothingProfile:
    """Per-layer oversmoothing ratio estimates for one architecture."""

    layers: tuple[int, ...]
    ratios: tuple[float, ...]
    ratio_ses: tuple[float, ...]
    rates: tuple[float, ...]
    num_samples: int

    def ratio(self, ell: int) -> tuple[float, float]:
        i = self.layers.index(ell)
        return self.ratios[i], self.ratio_ses[i]


def oversmoothing_profile(
    arch: Architecture,
    x: np.ndarray,
    m: int,
    seed: int,
    layers: tuple[int, ...] | None = None,
) -> OversmoothingProfile:
    """Monte-Carlo ``r_l`` for each requested layer via streaming traces.

    Only the top-eigenspace projections are kept per draw, so the cost is
    O(|V| * width) per layer rather than O(|V|^2).
    """
    if m < 2:
        raise ParameterError(f"need at least 2 samples, got {m}")
    layers = tuple(sorted(set(layers))) if layers else tuple(range(1, arch.depth + 1))
    _validate_layers(arch, layers)
    pi_basis = arch.base_operator.top_basis
    tops = {ell: np.zeros(m) for ell in layers}
    tots = {ell: np.zeros(m) for ell in layers}
    for s in range(m):
        state = init_weights(arch, seed=draw_seed(seed, s))
        trace = forward(state, arch, x)
        for ell in layers:
            z = trace.layer(ell)
            tops[ell][s] = np.sum((pi_basis.T @ z) ** 2) / z.shape[1]
            tots[ell][s] = np.sum(z * z) / z.shape[1]
    ratios, ses, rates = [], [], []
    for ell in layers:
        r, se = ratio_mean_se(tops[ell], tots[ell])
        r = min(max(r, 0.0), 1.0)
        ratios.append(r)
        ses.append(se)
        rates.append(oversmoothing_rate(r))
    return OversmoothingProfile(
        layers=layers,
        ratios=tuple(ratios),
        ratio_ses=tuple(ses),
        rates=tuple(rates),
        num_samples=m,
    )


def class_condition_number(
    trace: ForwardTrace,
    labels: np.ndarray,
    layer: int | None = None,
    num_classes: int | None = None,
) -> float:
    """Condition number of the class-averaged feature matrix.

    Rows are per-class means of the chosen layer's pre-activations
    (default: final hidden layer); singular values come from the
    eigenvalues of the small k x k Gram matrix. Returns +inf once
    ``sigma_min <= 1e-12 * sigma_max`` (rank collapse).
    """
    labels = np.asarray(labels)
    z = trace.pre[-1] if layer is None else trace.layer(layer)
    k = int(labels.max()) + 1 if num_classes is None else num_classes
    rows = []
    for c in range(k):
        members = labels == c
        if not members.any():
            raise ParameterError(f"class {c} has no vertices")
        rows.append(z[members].mean(axis=0))
    z_bar = np.stack(rows)
    return condition_number_of(z_bar)


def condition_number_of(matrix: np.ndarray) -> float:
    gram = matrix @ matrix.T
    eigs = np.linalg.eigvalsh(gram)
    eigs = np.clip(eigs, 0.0, None)
    smax = math.sqrt(float(eigs[-1]))
    smin = math.sqrt(float(eigs[0]))
    if smin <= 1e-12 * smax or smax == 0.0:
        return math.inf
    return smax / smin


def gradient_covariance_trace(
    arch: Architecture,
    x: np.ndarray,
    layers: tuple[int, ...],
    m: int,
    seed: int,
) -> dict[int, tuple[float, float]]:
    """Monte-Carlo ``tr G_l`` per layer: the per-neuron sum of squared
    input-output Jacobian entries, averaged over weight draws.

    Returns ``{layer: (estimate, se)}``. Full G matrices are
    O((|V| n0)^2) and are deliberately not formed.
    """
    if m < 2:
        raise ParameterError(f"need at least 2 samples, got {m}")
    layers = tuple(sorted(set(layers)))
    _validate_layers(arch, layers)
    x = np.asarray(x, dtype=np.float64)
    nv, n0 = x.shape
    totals = {ell: np.zeros(m) for ell in layers}
    for s in range(m):
        state = init_weights(arch, seed=draw_seed(seed, s))
        acc = {ell: 0.0 for ell in layers}
        for v0 in range(nv):
            for i0 in range(n0):
                jac = input_jacobian_rows(state, arch, x, v0, i0, layers=layers)
                for ell in layers:
                    t = jac[ell]
                    acc[ell] += float(np.sum(t * t)) / t.shape[1]
        for ell in layers:
            totals[ell][s] = acc[ell]
    return {
        ell: (
            float(np.mean(totals[ell])),
            float(np.std(totals[ell], ddof=1) / math.sqrt(m)),
        )
        for ell in layers
    }


DIAGNOSTICS_CSV_COLUMNS = (
    "config",
    "master_seed",
    "depth",
    "layer",
    "metric",
    "mean",
    "se",
    "q10",
    "q90",
    "seed_count",
)


def diagnostics_csv_row(
    config: str,
    master_seed: int,
    depth: int,
    layer: int,
    metric: str,
    mean: float,
    se: float,
    q10: float = math.nan,
    q90: float = math.nan,
    seed_count: int = 0,
) -> tuple:
    return (config, master_seed, depth, layer, metric, mean, se, q10, q90, seed_count)
