"""Finite-width ReLU graph network: forward pass, exact reverse-mode
gradients, forward-mode input Jacobians, and plain gradient descent.

Two wiring modes are supported.

Vanilla (no skip connections)::

    z1 = x W1
    z{l+1} = P_l relu(z_l) W{l+1},   l = 1..L

The matrix ``P_l`` is the layer's aggregation operator; with a residual
schedule it is the interpolation ``(1 - t_l) I + t_l P``.

Residual (fixup-style skip connections)::

    h  = x W_emb                       # non-residual embedding, He init
    z1 = h + beta_1 P_1 h W1           # no ReLU on the embedding
    z{l} = z{l-1} + beta_l P_l relu(z{l-1}) W_l,   l = 2..L
    out = relu(z_L) W_out              # plain linear readout

The embedding layer reconciles the skip connection's equal-width
requirement with an arbitrary input dimension; with all beta = 0 the final
hidden layer equals the embedded input exactly.

Weights are independent centered Gaussians. The generalized He scheme
sets each variance to ``2 / (fan_in * lam1(P)^2)`` with the convention
``lam1 = 1`` for weight matrices not preceded by an aggregation (the first
vanilla layer, the embedding, and the residual readout). ReLU's
subgradient at zero is taken to be zero. Biases do not exist. All
arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ContractError, ParameterError
from .rng import stream
from .spectral import AggregationOperator, ResidualSchedule, residual_operator

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class HeInit:
    """Variance 2 / (fan_in * lam1^2): keeps layer traces flat."""

    name: str = "he_gnn"


@dataclass(frozen=True)
class ExplicitInit:
    """Variance scale / (fan_in * lam1^2) for a chosen scale."""

    scale: float = 1.0
    name: str = "explicit"


@dataclass(frozen=True)
class UniformFanIn:
    """Symmetric uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)); the common
    framework default, included as the decaying baseline."""

    name: str = "uniform_baseline"

    @staticmethod
    def entry_variance(fan_in: int) -> float:
        return 1.0 / (3.0 * fan_in)


InitScheme = HeInit | ExplicitInit | UniformFanIn


def parse_scheme(name: str, scale: float | None = None) -> InitScheme:
    if name == "he_gnn":
        return HeInit()
    if name == "explicit":
        if scale is None:
            raise ParameterError("explicit scheme needs a scale")
        return ExplicitInit(scale=float(scale))
    if name == "uniform_baseline":
        return UniformFanIn()
    raise ParameterError(f"unknown initialization scheme {name!r}")


@dataclass(frozen=True)
class Architecture:
    """Depth, widths, per-layer operators, and the initialization scheme."""

    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int
    base_operator: AggregationOperator
    schedule: ResidualSchedule | None = None
    betas: tuple[float, ...] | None = None
    init: InitScheme = HeInit()

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1 or not self.hidden_widths:
            raise ParameterError("widths must be positive and depth at least 1")
        if any(w < 1 for w in self.hidden_widths):
            raise ParameterError(f"widths must be positive, got {self.hidden_widths}")
        if self.schedule is not None and len(self.schedule.ts) != self.depth:
            raise ParameterError(
                f"residual schedule length {len(self.schedule.ts)} != depth {self.depth}"
            )
        if self.betas is not None:
            if len(self.betas) != self.depth:
                raise ParameterError(
                    f"need one residual strength per layer, got {len(self.betas)}"
                )
            if any(b < 0 for b in self.betas):
                raise ParameterError(f"residual strengths must be >= 0, got {self.betas}")
            if len(set(self.hidden_widths)) != 1:
                raise ParameterError("residual mode requires equal hidden widths")

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)

    @property
    def residual_mode(self) -> bool:
        return self.betas is not None

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @cached_property
    def operators(self) -> tuple[AggregationOperator, ...]:
        """One operator per hidden layer l = 1..L.

        Vanilla mode applies operator l to relu(z_l); residual mode applies
        operator l inside the transition that produces z_l.
        """
        if self.schedule is None:
            return tuple([self.base_operator] * self.depth)
        cache: dict[float, AggregationOperator] = {}
        ops = []
        for t in self.schedule.ts:
            if t not in cache:
                cache[t] = residual_operator(self.base_operator, t)
            ops.append(cache[t])
        return tuple(ops)

    @property
    def weight_shapes(self) -> tuple[tuple[int, int], ...]:
        if self.residual_mode:
            nh = self.hidden_widths[0]
            return (
                (self.input_dim, nh),
                *[(nh, nh)] * self.depth,
                (nh, self.output_dim),
            )
        dims = self.widths
        return tuple((dims[i], dims[i + 1]) for i in range(len(dims) - 1))

    @cached_property
    def weight_lam1s(self) -> tuple[float, ...]:
        """lam1 of the operator feeding each weight matrix (1 when none)."""
        ops = self.operators
        if self.residual_mode:
            # embedding, transitions 1..L (operator l), readout
            return (1.0, *[op.lam1 for op in ops], 1.0)
        # vanilla: W1 sees raw features; W{l+1} follows operator l
        return (1.0, *[op.lam1 for op in ops])

    def weight_variances(self, scheme: InitScheme | None = None) -> tuple[float, ...]:
        """Gaussian entry variance per weight matrix under the scheme.

        For the uniform baseline the reported value is the entry variance
        of the uniform law. The residual-mode embedding is always He.
        """
        scheme = scheme if scheme is not None else self.init
        out = []
        for idx, ((fan_in, _), lam1) in enumerate(zip(self.weight_shapes, self.weight_lam1s)):
            if self.residual_mode and idx == 0:
                out.append(2.0 / fan_in)
            elif isinstance(scheme, HeInit):
                out.append(2.0 / (fan_in * lam1**2))
            elif isinstance(scheme, ExplicitInit):
                out.append(scheme.scale / (fan_in * lam1**2))
            else:
                out.append(UniformFanIn.entry_variance(fan_in))
        return tuple(out)


@dataclass(frozen=True)
class NetworkState:
    """Weight matrices plus the seed and scheme that produced them."""

    weights: tuple[np.ndarray, ...]
    seed: int
    scheme_name: str

    def __post_init__(self) -> None:
        for w in self.weights:
            if not np.all(np.isfinite(w)):
                raise ContractError("weights contain non-finite entries")


def init_weights(
    arch: Architecture, seed: int, scheme: InitScheme | None = None
) -> NetworkState:
    """Draw an independent weight set; deterministic per (arch, scheme, seed)."""
    scheme = scheme if scheme is not None else arch.init
    variances = arch.weight_variances(scheme)
    weights = []
    for idx, (shape, var) in enumerate(zip(arch.weight_shapes, variances)):
        gen = stream(seed, "weights", idx)
        if isinstance(scheme, UniformFanIn) and not (arch.residual_mode and idx == 0):
            bound = 1.0 / np.sqrt(shape[0])
            weights.append(gen.uniform(-bound, bound, size=shape))
        else:
            weights.append(gen.normal(size=shape) * np.sqrt(var))
    return NetworkState(weights=tuple(weights), seed=seed, scheme_name=scheme.name)


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer pre-activations from one forward pass.

    ``pre[l - 1]`` is the layer-l pre-activation z_l for l = 1..L, and
    ``output`` is z_{L+1}. ``embedded`` is the residual-mode embedding.
    ``agg_inputs[i]`` is the matrix that multiplies weight i (aggregated
    activations, cached so the backward pass reuses them).
    """

    x: np.ndarray
    pre: tuple[np.ndarray, ...]
    output: np.ndarray
    embedded: np.ndarray | None = None
    agg_inputs: tuple[np.ndarray, ...] = ()

    def layer(self, ell: int) -> np.ndarray:
        """Pre-activations of layer ``ell`` (1-based; L+1 is the output)."""
        if ell == len(self.pre) + 1:
            return self.output
        return self.pre[ell - 1]


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _check_input(arch: Architecture, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    nv = arch.base_operator.num_vertices
    if x.shape != (nv, arch.input_dim):
        raise ContractError(
            f"input shape {x.shape} does not match (|V|, n0) = ({nv}, {arch.input_dim})"
        )
    return x


def forward(state: NetworkState, arch: Architecture, x: np.ndarray) -> ForwardTrace:
    x = _check_input(arch, x)
    _check_state(state, arch)
    W = state.weights
    ops = arch.operators
    if arch.residual_mode:
        betas = arch.betas
        h = x @ W[0]
        agg = [x, ops[0].apply(h)]
        z = h + betas[0] * (agg[1] @ W[1])
        pre = [z]
        for ell in range(2, arch.depth + 1):
            agg.append(ops[ell - 1].apply(relu(z)))
            z = z + betas[ell - 1] * (agg[-1] @ W[ell])
            pre.append(z)
        agg.append(relu(z))
        out = agg[-1] @ W[-1]
        return ForwardTrace(
            x=x, pre=tuple(pre), output=out, embedded=h, agg_inputs=tuple(agg)
        )
    z = x @ W[0]
    pre = [z]
    agg = [x]
    for ell in range(1, arch.depth):
        agg.append(ops[ell - 1].apply(relu(z)))
        z = agg[-1] @ W[ell]
        pre.append(z)
    agg.append(ops[arch.depth - 1].apply(relu(z)))
    out = agg[-1] @ W[arch.depth]
    return ForwardTrace(x=x, pre=tuple(pre), output=out, agg_inputs=tuple(agg))


def _check_state(state: NetworkState, arch: Architecture) -> None:
    shapes = tuple(w.shape for w in state.weights)
    if shapes != arch.weight_shapes:
        raise ContractError(
            f"weight shapes {shapes} do not match architecture {arch.weight_shapes}"
        )


def _check_trace(trace: ForwardTrace, arch: Architecture) -> None:
    if len(trace.pre) != arch.depth:
        raise ContractError(
            f"trace has {len(trace.pre)} layers, architecture depth is {arch.depth}"
        )
    if trace.output.shape[1] != arch.output_dim:
        raise ContractError("trace output width does not match architecture")
    if arch.residual_mode != (trace.embedded is not None):
        raise ContractError("trace mode does not match architecture mode")


def backward(
    state: NetworkState,
    arch: Architecture,
    trace: ForwardTrace,
    grad_output: np.ndarray,
) -> tuple[np.ndarray, ...]:
    """Exact gradients of sum(grad_output * z_{L+1}) w.r.t. every weight.

    ReLU's subgradient at 0 is 0 (a measure-zero event for the Gaussian
    initializations used here).
    """
    _check_state(state, arch)
    _check_trace(trace, arch)
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != trace.output.shape:
        raise ContractError(
            f"grad_output shape {g.shape} != output shape {trace.output.shape}"
        )
    W = state.weights
    ops = arch.operators
    agg = trace.agg_inputs
    grads: list[np.ndarray | None] = [None] * len(W)
    if arch.residual_mode:
        betas = arch.betas
        grads[-1] = agg[-1].T @ g
        gz = (g @ W[-1].T) * (trace.pre[-1] > 0)
        for ell in range(arch.depth, 1, -1):
            z_prev = trace.pre[ell - 2]
            grads[ell] = agg[ell].T @ (betas[ell - 1] * gz)
            gz = gz + betas[ell - 1] * ops[ell - 1].apply(gz @ W[ell].T) * (z_prev > 0)
        grads[1] = agg[1].T @ (betas[0] * gz)
        gh = gz + betas[0] * ops[0].apply(gz @ W[1].T)
        grads[0] = trace.x.T @ gh
    else:
        grads[arch.depth] = agg[arch.depth].T @ g
        gz = ops[arch.depth - 1].apply(g @ W[arch.depth].T) * (trace.pre[-1] > 0)
        for ell in range(arch.depth - 1, 0, -1):
            grads[ell] = agg[ell].T @ gz
            gz = ops[ell - 1].apply(gz @ W[ell].T) * (trace.pre[ell - 1] > 0)
        grads[0] = trace.x.T @ gz
    return tuple(grads)  # type: ignore[arg-type]


def input_jacobian_rows(
    state: NetworkState,
    arch: Architecture,
    x: np.ndarray,
    vertex: int,
    coordinate: int,
    layers: tuple[int, ...] | None = None,
) -> dict[int, np.ndarray]:
    """Derivatives of every pre-activation w.r.t. one input coordinate.

    One forward-mode sweep seeded with the unit tangent at
    ``x[vertex, coordinate]``. Returns ``{layer: d z_layer / d x_vc}`` for
    the requested layers (default: all, with L+1 the output layer).
    """
    x = _check_input(arch, x)
    if not (0 <= vertex < x.shape[0] and 0 <= coordinate < x.shape[1]):
        raise ContractError(
            f"vertex/coordinate ({vertex}, {coordinate}) outside input of shape {x.shape}"
        )
    trace = forward(state, arch, x)
    wanted = set(layers) if layers is not None else set(range(1, arch.depth + 2))
    W = state.weights
    ops = arch.operators
    tangent_x = np.zeros_like(x)
    tangent_x[vertex, coordinate] = 1.0
    out: dict[int, np.ndarray] = {}
    if arch.residual_mode:
        betas = arch.betas
        th = tangent_x @ W[0]
        t = th + betas[0] * ops[0].apply(th @ W[1])
        if 1 in wanted:
            out[1] = t.copy()
        for ell in range(2, arch.depth + 1):
            z_prev = trace.pre[ell - 2]
            t = t + betas[ell - 1] * ops[ell - 1].apply((t * (z_prev > 0)) @ W[ell])
            if ell in wanted:
                out[ell] = t.copy()
        if arch.depth + 1 in wanted:
            out[arch.depth + 1] = (t * (trace.pre[-1] > 0)) @ W[-1]
    else:
        t = tangent_x @ W[0]
        if 1 in wanted:
            out[1] = t.copy()
        for ell in range(1, arch.depth):
            t = ops[ell - 1].apply(t * (trace.pre[ell - 1] > 0)) @ W[ell]
            if ell + 1 in wanted:
                out[ell + 1] = t.copy()
        if arch.depth + 1 in wanted:
            out[arch.depth + 1] = (
                ops[arch.depth - 1].apply(t * (trace.pre[-1] > 0)) @ W[arch.depth]
            )
    return out


def gd_step(
    state: NetworkState, grads: tuple[np.ndarray, ...], lr: float
) -> NetworkState:
    """One full-batch gradient descent update, returning a new state."""
    if len(grads) != len(state.weights):
        raise ContractError(
            f"got {len(grads)} gradients for {len(state.weights)} weight matrices"
        )
    for w, g in zip(state.weights, grads):
        if w.shape != g.shape:
            raise ContractError(f"gradient shape {g.shape} != weight shape {w.shape}")
    new_weights = tuple(w - lr * g for w, g in zip(state.weights, grads))
    return replace(state, weights=new_weights)


def save_state(state: NetworkState, path) -> None:
    """Versioned binary checkpoint: shapes plus row-major weight payload."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "seed": np.array(state.seed, dtype=np.int64),
        "scheme": np.array(state.scheme_name),
        "num_weights": np.array(len(state.weights)),
    }
    for i, w in enumerate(state.weights):
        payload[f"weight_{i}"] = np.ascontiguousarray(w)
    np.savez(path, **payload)


def load_state(path) -> NetworkState:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ContractError(f"unsupported checkpoint version {version}")
        count = int(data["num_weights"])
        weights = tuple(data[f"weight_{i}"] for i in range(count))
        return NetworkState(
            weights=weights,
            seed=int(data["seed"]),
            scheme_name=str(data["scheme"]),
        )
