"""Figure families over the gnnlab CSV schemas.

Three families are supported:

* ``distortion``      log-scale distortion vs depth, one line per
                      configuration, with optional corridor shading from a
                      bounds CSV sharing (config, depth, layer) keys;
* ``time-vs-metric``  steps-to-threshold vs an at-initialization metric,
                      scattered with depth-coded colors;
* ``ablation``        mean test accuracy (or median steps) vs depth, one
                      line per configuration with across-seed error bands.

Rendering is deterministic: fixed style, fixed hash salt, no timestamps
or software metadata, so identical inputs give identical bytes on one
platform. Schema violations raise ``FigureError`` naming the missing
columns; empty selections raise rather than emitting an empty image.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

matplotlib.rcParams["svg.hashsalt"] = "gnnlab-figures"
matplotlib.rcParams["figure.dpi"] = 110

FAMILIES = ("distortion", "time-vs-metric", "ablation")

DIAGNOSTICS_COLUMNS = {
    "config", "master_seed", "depth", "layer", "metric",
    "mean", "se", "q10", "q90", "seed_count",
}
BOUNDS_COLUMNS = {"config", "master_seed", "depth", "layer", "metric", "lower", "upper"}
RESULTS_COLUMNS = {
    "config", "master_seed", "depth", "t", "beta", "lr", "cw_scale", "seed",
    "task", "steps_to_threshold", "best_val_acc", "test_acc_at_selection",
    "init_distortion", "init_oversmoothing_rate", "init_class_condition",
}


class FigureError(ValueError):
    """Input does not conform to the documented CSV schemas."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: family, inputs, and output path."""

    family: str
    inputs: tuple[str, ...]
    output: str
    bounds: str | None = None
    metric: str = "init_oversmoothing_rate"  # time-vs-metric x-axis
    value: str = "test_acc_at_selection"  # ablation y-axis
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise FigureError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}"
            )
        if not self.inputs:
            raise FigureError("at least one input CSV is required")


def read_rows(path: str, required: set[str], label: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            columns = set(reader.fieldnames or [])
            missing = required - columns
            if missing:
                raise FigureError(
                    f"{label} {path}: missing columns {sorted(missing)}; "
                    f"expected {sorted(required)}, found {sorted(columns)}"
                )
            rows = list(reader)
    except OSError as exc:
        raise FigureError(f"cannot read {label} {path}: {exc}") from exc
    if not rows:
        raise FigureError(f"{label} {path}: no data rows")
    return rows


def _to_float(row: dict, key: str) -> float:
    raw = row.get(key, "")
    if raw in ("", None):
        return math.nan
    try:
        return float(raw)
    except ValueError as exc:
        raise FigureError(f"column {key}: non-numeric value {raw!r}") from exc


def _figure():
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.grid(True, alpha=0.3, linewidth=0.5)
    return fig, ax


def _save(fig, output: str) -> None:
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".svg"):
        raise FigureError(f"unsupported output format {suffix!r}; use .png or .svg")
    metadata = {"Software": None} if suffix == ".png" else {"Date": None}
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def _render_distortion(spec: FigureSpec) -> None:
    rows = []
    for path in spec.inputs:
        rows.extend(read_rows(path, DIAGNOSTICS_COLUMNS, "diagnostics CSV"))
    rows = [r for r in rows if r["metric"] == "distortion"]
    if not rows:
        raise FigureError("no rows with metric == 'distortion'")
    fig, ax = _figure()
    by_config: dict[str, list] = {}
    for r in rows:
        by_config.setdefault(r["config"], []).append(
            (int(r["depth"]), _to_float(r, "mean"), _to_float(r, "se"))
        )
    for config in sorted(by_config):
        points = sorted(by_config[config])
        depths = [p[0] for p in points]
        means = [p[1] for p in points]
        ses = [p[2] for p in points]
        ax.errorbar(depths, means, yerr=[3 * s for s in ses], marker="o",
                    capsize=3, label=config.split("#")[0])
    if spec.bounds:
        bounds = read_rows(spec.bounds, BOUNDS_COLUMNS, "bounds CSV")
        by_config = {}
        for r in bounds:
            if r["metric"] != "distortion":
                continue
            by_config.setdefault(r["config"], []).append(
                (int(r["depth"]), _to_float(r, "lower"), _to_float(r, "upper"))
            )
        for config, points in sorted(by_config.items()):
            points.sort()
            depths = [p[0] for p in points]
            ax.fill_between(depths, [p[1] for p in points], [p[2] for p in points],
                            alpha=0.15, linewidth=0,
                            label=f"{config.split('#')[0]} corridor")
    ax.set_yscale("log")
    ax.set_xlabel("depth")
    ax.set_ylabel("output distortion (mean over vertices and inits)")
    ax.legend(fontsize=7)
    _save(fig, spec.output)


def _render_time_vs_metric(spec: FigureSpec) -> None:
    rows = []
    for path in spec.inputs:
        rows.extend(read_rows(path, RESULTS_COLUMNS, "results CSV"))
    if spec.metric not in RESULTS_COLUMNS:
        raise FigureError(
            f"metric {spec.metric!r} not a results column; expected one of "
            f"{sorted(RESULTS_COLUMNS)}"
        )
    fig, ax = _figure()
    depths = sorted({int(r["depth"]) for r in rows})
    cmap = plt.get_cmap("viridis", max(len(depths), 2))
    for i, depth in enumerate(depths):
        xs, ys = [], []
        for r in rows:
            if int(r["depth"]) != depth:
                continue
            x = _to_float(r, spec.metric)
            y = _to_float(r, "steps_to_threshold")
            if math.isfinite(x) and math.isfinite(y):
                xs.append(x)
                ys.append(y)
        if xs:
            ax.scatter(xs, ys, s=22, color=cmap(i), label=f"depth {depth}")
    if not ax.collections:
        raise FigureError(f"no finite (steps, {spec.metric}) pairs to plot")
    ax.set_xlabel(spec.metric.replace("_", " "))
    ax.set_ylabel("steps to reach linear-baseline accuracy")
    ax.legend(fontsize=7)
    _save(fig, spec.output)


def _render_ablation(spec: FigureSpec) -> None:
    rows = []
    for path in spec.inputs:
        rows.extend(read_rows(path, RESULTS_COLUMNS, "results CSV"))
    if spec.value not in RESULTS_COLUMNS:
        raise FigureError(f"value column {spec.value!r} not in results schema")
    fig, ax = _figure()
    grouped: dict[tuple[str, int], list[float]] = {}
    for r in rows:
        v = _to_float(r, spec.value)
        if math.isfinite(v):
            grouped.setdefault((r["config"].split("#")[0], int(r["depth"])), []).append(v)
    if not grouped:
        raise FigureError(f"no finite values in column {spec.value!r}")
    configs = sorted({key[0] for key in grouped})
    for config in configs:
        depths = sorted(d for c, d in grouped if c == config)
        means, bands = [], []
        for d in depths:
            vals = grouped[(config, d)]
            means.append(sum(vals) / len(vals))
            if len(vals) > 1:
                mu = means[-1]
                sd = math.sqrt(sum((v - mu) ** 2 for v in vals) / (len(vals) - 1))
                bands.append(sd / math.sqrt(len(vals)))
            else:
                bands.append(0.0)
        ax.errorbar(depths, means, yerr=bands, marker="s", capsize=3, label=config)
    ax.set_xlabel("depth")
    ax.set_ylabel(spec.value.replace("_", " "))
    ax.legend(fontsize=7)
    _save(fig, spec.output)


_RENDERERS = {
    "distortion": _render_distortion,
    "time-vs-metric": _render_time_vs_metric,
    "ablation": _render_ablation,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.family](spec)
    return spec.output
