"""Full-batch gradient-descent training and the two measurement protocols:
performance scans (test accuracy at the stability-qualified validation
optimum) and time-to-train scans (steps to hold the linear-baseline
threshold).

Both classification (softmax cross-entropy) and regression (mean squared
error against one-hot labels) consume the same forward pass; only the loss
and its gradient differ. Accuracy is argmax-vs-label for both tasks. An
"epoch" equals one full-batch step throughout.

Checkpoint selection: a step qualifies once the validation accuracy has
either strictly increased at every step of the trailing 25-step window or
stayed within 2.5% (relative) of its current value across that window;
among qualifying steps the one minimizing validation loss is selected and
its test accuracy reported.

Time to train: the first step count at which training accuracy has been
above the threshold for 10 consecutive steps while the validation accuracy
either net-increased over the trailing 10 steps or stayed within 5%
(relative) of its current value; runs that never qualify report the
max-step sentinel, as do diverged runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    class_condition_number,
    output_distortion,
    oversmoothing_rate,
)
from .engine import Architecture, backward, forward, gd_step, init_weights
from .errors import ContractError, ParameterError
from .graphs import Graph
from .rng import stream

LINEAR_BASELINE_LRS = (0.05, 0.01, 0.005, 0.001, 0.0005)
SELECT_WINDOW = 25
SELECT_BAND = 0.025
TIME_WINDOW = 10
TIME_BAND = 0.05


@dataclass(frozen=True)
class TrainConfig:
    task: str = "classification"  # or "regression"
    lr: float = 0.01
    max_steps: int = 800
    lr_drop: tuple[float, int] | None = None  # (factor, after_step)
    stopping: str = "performance"  # or "time-to-train"
    threshold: float | None = None  # required for time-to-train early stop

    def __post_init__(self) -> None:
        if self.task not in ("classification", "regression"):
            raise ParameterError(f"unknown task {self.task!r}")
        if self.lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")
        if self.max_steps < 1:
            raise ParameterError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.stopping not in ("performance", "time-to-train"):
            raise ParameterError(f"unknown stopping protocol {self.stopping!r}")


@dataclass(frozen=True)
class TrainRun:
    """Per-step metrics (index k = after k gradient steps; index 0 is the
    initial state). Accuracies are fractions in [0, 1]."""

    train_acc: np.ndarray
    val_acc: np.ndarray
    test_acc: np.ndarray
    train_loss: np.ndarray
    val_loss: np.ndarray
    test_loss: np.ndarray
    steps_run: int
    max_steps: int
    diverged: bool
    seed: int
    init_distortion: float
    init_oversmoothing_rate: float
    init_class_condition: float


def _loss_and_grad(task, out, onehot, mask):
    """Mean loss over the mask and its gradient w.r.t. the readout.

    Overflow maps to an infinite loss, which the training loop records as
    divergence rather than raising.
    """
    count = int(mask.sum())
    if task == "regression":
        with np.errstate(over="ignore"):
            diff = out - onehot
            loss = float(np.sum(diff[mask] ** 2) / (count * out.shape[1]))
            grad = np.zeros_like(out)
            grad[mask] = 2.0 * diff[mask] / (count * out.shape[1])
        return loss, grad
    with np.errstate(over="ignore", invalid="ignore"):
        shifted = out - out.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        softmax = expz / expz.sum(axis=1, keepdims=True)
        label_logprob = shifted - np.log(expz.sum(axis=1, keepdims=True))
        picked = label_logprob[np.arange(out.shape[0]), np.argmax(onehot, axis=1)]
        loss = float(-np.sum(picked[mask]) / count)
        grad = np.zeros_like(out)
        grad[mask] = (softmax[mask] - onehot[mask]) / count
    return loss, grad


def _masked_loss(task, out, onehot, mask):
    loss, _ = _loss_and_grad(task, out, onehot, mask)
    return loss


def train(
    graph: Graph, arch: Architecture, config: TrainConfig, seed: int
) -> TrainRun:
    """Full-batch GD on the train mask; logs all three masks every step.

    Divergence (non-finite loss) marks the run failed instead of raising.
    With the time-to-train protocol and a threshold, the loop stops once
    the qualification rule is satisfied.
    """
    masks = graph.masks
    if not masks.train.any():
        raise ParameterError("train mask is empty")
    if arch.output_dim != graph.num_classes:
        raise ContractError(
            f"readout width {arch.output_dim} != number of classes {graph.num_classes}"
        )
    x = graph.features
    onehot = np.eye(graph.num_classes)[graph.labels]
    state = init_weights(arch, seed=seed)
    init_trace = forward(state, arch, x)
    distortion = float(
        np.mean([output_distortion(init_trace, x, v) for v in range(graph.num_vertices)])
    )
    pi_basis = arch.base_operator.top_basis
    z_last = init_trace.pre[-1]
    top = float(np.sum((pi_basis.T @ z_last) ** 2))
    tot = float(np.sum(z_last * z_last))
    r_hat = min(max(top / tot, 0.0), 1.0) if tot > 0 else 0.0
    n_steps = config.max_steps
    tr_acc = np.full(n_steps + 1, np.nan)
    va_acc = np.full(n_steps + 1, np.nan)
    te_acc = np.full(n_steps + 1, np.nan)
    tr_loss = np.full(n_steps + 1, np.nan)
    va_loss = np.full(n_steps + 1, np.nan)
    te_loss = np.full(n_steps + 1, np.nan)

    def record(k, out):
        pred = np.argmax(out, axis=1)
        correct = pred == graph.labels
        for acc_arr, loss_arr, mask in (
            (tr_acc, tr_loss, masks.train),
            (va_acc, va_loss, masks.val),
            (te_acc, te_loss, masks.test),
        ):
            if mask.any():
                acc_arr[k] = float(np.mean(correct[mask]))
                loss_arr[k] = _masked_loss(config.task, out, onehot, mask)

    record(0, init_trace.output)
    run_info = dict(
        seed=seed,
        init_distortion=distortion,
        init_oversmoothing_rate=oversmoothing_rate(r_hat),
        init_class_condition=class_condition_number(init_trace, graph.labels),
        max_steps=config.max_steps,
    )
    trace = init_trace
    diverged = False
    steps_run = 0
    for k in range(1, n_steps + 1):
        loss, grad_out = _loss_and_grad(config.task, trace.output, onehot, masks.train)
        if not math.isfinite(loss):
            diverged = True
            steps_run = k - 1
            break
        lr = config.lr
        if config.lr_drop is not None and k > config.lr_drop[1]:
            lr = config.lr * config.lr_drop[0]
        with np.errstate(over="ignore", invalid="ignore"):
            grads = backward(state, arch, trace, grad_out)
        if not all(np.all(np.isfinite(g)) for g in grads):
            diverged = True
            steps_run = k - 1
            break
        state = gd_step(state, grads, lr)
        trace = forward(state, arch, x)
        record(k, trace.output)
        steps_run = k
        if (
            config.stopping == "time-to-train"
            and config.threshold is not None
            and _time_step_qualifies(tr_acc, va_acc, k, config.threshold)
        ):
            break
    cut = steps_run + 1
    return TrainRun(
        train_acc=tr_acc[:cut],
        val_acc=va_acc[:cut],
        test_acc=te_acc[:cut],
        train_loss=tr_loss[:cut],
        val_loss=va_loss[:cut],
        test_loss=te_loss[:cut],
        steps_run=steps_run,
        diverged=diverged,
        **run_info,
    )


def _time_step_qualifies(train_acc, val_acc, step: int, threshold: float) -> bool:
    """Whether ``step`` satisfies the time-to-train rule given the trace
    prefix up to it. Qualification depends only on the trailing window, so
    training can test just the newest step."""
    if step < TIME_WINDOW:
        return False
    window = train_acc[step - TIME_WINDOW + 1 : step + 1]
    if not np.all(window > threshold):
        return False
    current = val_acc[step]
    increased = current > val_acc[step - TIME_WINDOW]
    band = val_acc[step - TIME_WINDOW + 1 : step + 1]
    stable = bool(np.all(np.abs(band - current) <= TIME_BAND * max(current, 1e-12)))
    return bool(increased or stable)


def time_to_train(run: TrainRun, threshold: float) -> int:
    """Steps until training accuracy holds above ``threshold`` for 10
    consecutive steps with stable-or-improving validation accuracy; the
    max-step sentinel when never achieved (including diverged runs)."""
    if run.diverged:
        return run.max_steps
    for step in range(TIME_WINDOW, len(run.train_acc)):
        if _time_step_qualifies(run.train_acc, run.val_acc, step, threshold):
            return step
    return run.max_steps


def _qualifying_steps(val_acc: np.ndarray) -> list[int]:
    steps = []
    for k in range(SELECT_WINDOW, len(val_acc)):
        window = val_acc[k - SELECT_WINDOW : k + 1]
        if np.any(np.isnan(window)):
            continue
        increased = bool(np.all(np.diff(window) > 0))
        stable = bool(
            np.all(np.abs(window - val_acc[k]) <= SELECT_BAND * max(val_acc[k], 1e-12))
        )
        if increased or stable:
            steps.append(k)
    return steps


def select_best_checkpoint(run: TrainRun) -> tuple[int, float]:
    """(selected step, test accuracy) under the stability-qualified
    validation rule; among qualifying steps the validation loss is
    minimized (earliest step on ties). Falls back to the global validation
    loss minimum when no step qualifies (short or unstable runs)."""
    steps = _qualifying_steps(run.val_acc)
    if not steps:
        finite = np.where(np.isfinite(run.val_loss))[0]
        if len(finite) == 0:
            return 0, float(run.test_acc[0])
        best = int(finite[np.argmin(run.val_loss[finite])])
        return best, float(run.test_acc[best])
    losses = run.val_loss[steps]
    best = steps[int(np.argmin(losses))]
    return int(best), float(run.test_acc[best])


def linear_baseline(
    graph: Graph,
    seed: int,
    lrs: tuple[float, ...] = LINEAR_BASELINE_LRS,
    max_steps: int = 800,
) -> float:
    """Best validation accuracy of a single trained linear layer.

    One classification run per learning rate in the scan set; the
    threshold is the best validation accuracy seen across steps and rates.
    """
    masks = graph.masks
    if not (masks.train.any() and masks.val.any()):
        raise ParameterError("linear baseline needs nonempty train and val masks")
    x = graph.features
    onehot = np.eye(graph.num_classes)[graph.labels]
    best = 0.0
    for lr_index, lr in enumerate(lrs):
        gen = stream(seed, "linear-baseline", lr_index)
        W = gen.normal(size=(graph.num_features, graph.num_classes)) * math.sqrt(
            2.0 / graph.num_features
        )
        for _ in range(max_steps):
            out = x @ W
            _, grad = _loss_and_grad("classification", out, onehot, masks.train)
            W = W - lr * (x.T @ grad)
            acc = float(np.mean((np.argmax(x @ W, axis=1) == graph.labels)[masks.val]))
            best = max(best, acc)
    return best


# ---------------------------------------------------------------------------
# Hyperparameter sweeps
# ---------------------------------------------------------------------------

RESULT_CSV_COLUMNS = (
    "config",
    "master_seed",
    "depth",
    "t",
    "beta",
    "lr",
    "cw_scale",
    "seed",
    "task",
    "steps_to_threshold",
    "best_val_acc",
    "test_acc_at_selection",
    "init_distortion",
    "init_oversmoothing_rate",
    "init_class_condition",
)


@dataclass(frozen=True)
class SweepJob:
    """One (configuration, seed) training job."""

    config_id: str
    graph: Graph
    arch: Architecture
    train_config: TrainConfig
    seed: int
    threshold: float | None
    depth: int
    t: float | None
    beta: float | None
    cw_scale: float | None


@dataclass(frozen=True)
class SweepRecord:
    config_id: str
    seed: int
    steps_to_threshold: int | None
    best_val_acc: float
    test_acc: float
    selected_step: int
    diverged: bool
    init_distortion: float
    init_oversmoothing_rate: float
    init_class_condition: float
    depth: int
    t: float | None
    beta: float | None
    lr: float
    cw_scale: float | None
    task: str


def run_job(job: SweepJob) -> SweepRecord:
    run = train(job.graph, job.arch, job.train_config, job.seed)
    steps = (
        time_to_train(run, job.threshold) if job.threshold is not None else None
    )
    finite_val = run.val_acc[np.isfinite(run.val_acc)]
    best_val = float(np.max(finite_val)) if len(finite_val) else math.nan
    selected, test_acc = select_best_checkpoint(run)
    return SweepRecord(
        config_id=job.config_id,
        seed=job.seed,
        steps_to_threshold=steps,
        best_val_acc=best_val,
        test_acc=test_acc,
        selected_step=selected,
        diverged=run.diverged,
        init_distortion=run.init_distortion,
        init_oversmoothing_rate=run.init_oversmoothing_rate,
        init_class_condition=run.init_class_condition,
        depth=job.depth,
        t=job.t,
        beta=job.beta,
        lr=job.train_config.lr,
        cw_scale=job.cw_scale,
        task=job.train_config.task,
    )


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    best_config: str | None
    best_mean_val: float


def sweep(jobs: list[SweepJob], workers: int = 1) -> SweepResult:
    """Run every job, average the validation metric per configuration, and
    select the argmax configuration.

    Configurations whose runs all failed are excluded from the argmax;
    partially failed ones average over their completed runs.
    """
    if not jobs:
        raise ParameterError("sweep grid is empty")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_job, jobs))
    else:
        records = [run_job(job) for job in jobs]
    by_config: dict[str, list[SweepRecord]] = {}
    for rec in records:
        by_config.setdefault(rec.config_id, []).append(rec)
    best_config, best_val = None, -math.inf
    for config_id, recs in sorted(by_config.items()):
        completed = [r for r in recs if not r.diverged and math.isfinite(r.best_val_acc)]
        if not completed:
            continue
        mean_val = float(np.mean([r.best_val_acc for r in completed]))
        if mean_val > best_val:
            best_config, best_val = config_id, mean_val
    return SweepResult(
        records=tuple(records), best_config=best_config, best_mean_val=best_val
    )


def result_csv_row(rec: SweepRecord, master_seed: int) -> tuple:
    return (
        rec.config_id,
        master_seed,
        rec.depth,
        "" if rec.t is None else rec.t,
        "" if rec.beta is None else rec.beta,
        rec.lr,
        "" if rec.cw_scale is None else rec.cw_scale,
        rec.seed,
        rec.task,
        "" if rec.steps_to_threshold is None else rec.steps_to_threshold,
        rec.best_val_acc,
        rec.test_acc,
        rec.init_distortion,
        rec.init_oversmoothing_rate,
        rec.init_class_condition,
    )
