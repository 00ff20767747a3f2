"""Command-line entry point.

Subcommands map one-to-one onto the experiment pipelines:

* ``generate``       draw a graph (with features and splits) to a file
* ``diagnose``       Monte-Carlo failure-mode metrics + theory corridors, as CSV
* ``verify-theory``  run the bound/lemma verification suites; exit 0 iff green
* ``train``          run the training grid of a spec, writing the result table
* ``sweep``          same as train plus best-configuration selection summary

Every run is driven by a JSON experiment spec (see ``ExperimentSpec``) and
one master seed; identical (spec, seed) reruns produce byte-identical
outputs. Exit codes: 0 success, 2 spec/parameter error, 3 numeric or
verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics, theory, training
from .engine import Architecture, parse_scheme
from .errors import GNNLabError, NumericError, ParameterError
from .graphs import (
    Graph,
    SSBMParams,
    generate_ssbm,
    load_graph,
    save_graph,
    split_vertices,
    synthesize_features,
    with_masks,
)
from .rng import spawn_seeds
from .spectral import (
    AggregationOperator,
    ResidualSchedule,
    normalized_adjacency,
    spectrum_csv_rows,
)

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_NUMERIC = 3

SPEC_VERSION = 1


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated experiment description (round-trips through JSON)."""

    version: int
    seed: int
    dataset: dict
    architecture: dict
    diagnostics: dict
    training: dict
    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read spec {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        version = raw.get("version")
        if version != SPEC_VERSION:
            raise ParameterError(f"unsupported spec version {version!r}")
        if "seed" not in raw or not isinstance(raw["seed"], int):
            raise ParameterError("spec needs an integer master seed")
        dataset = raw.get("dataset")
        if not isinstance(dataset, dict) or dataset.get("kind") not in ("ssbm", "file"):
            raise ParameterError("spec dataset.kind must be 'ssbm' or 'file'")
        return cls(
            version=version,
            seed=raw["seed"],
            dataset=dataset,
            architecture=raw.get("architecture", {}),
            diagnostics=raw.get("diagnostics", {}),
            training=raw.get("training", {}),
            raw=raw,
        )

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def build_dataset(spec: ExperimentSpec, seed: int) -> tuple[Graph, dict]:
    """Materialize the spec's dataset, returning the graph and provenance."""
    ds = spec.dataset
    if ds["kind"] == "file":
        graph = load_graph(ds["path"])
        return graph, {"kind": "file", "path": str(ds["path"])}
    params = SSBMParams(
        n=int(ds["n"]), a=float(ds["a"]), b=float(ds["b"]), seed=seed
    )
    graph = generate_ssbm(params)
    n0 = int(ds.get("num_features", 8))
    separation = float(ds.get("class_separation", 4.0))
    graph = synthesize_features(graph, n0, separation, seed)
    fractions = tuple(ds.get("fractions", (0.5, 0.25, 0.25)))
    graph = with_masks(graph, split_vertices(graph, fractions, seed))
    provenance = {
        "kind": "ssbm",
        "n": params.n,
        "a": params.a,
        "b": params.b,
        "num_features": n0,
        "class_separation": separation,
        "fractions": list(fractions),
        "seed": seed,
    }
    return graph, provenance


def _schedule(t_value, depth: int) -> ResidualSchedule | None:
    if t_value is None:
        return None
    if isinstance(t_value, dict):
        if "sum" in t_value:
            return ResidualSchedule.total(float(t_value["sum"]), depth)
        raise ParameterError(f"unknown residual schedule form {t_value!r}")
    return ResidualSchedule.constant(float(t_value), depth)


def _betas(beta_value, depth: int) -> tuple[float, ...] | None:
    if beta_value is None:
        return None
    if isinstance(beta_value, dict):
        if "rsqrt" in beta_value:
            return tuple([float(beta_value["rsqrt"]) / math.sqrt(depth)] * depth)
        raise ParameterError(f"unknown residual connection form {beta_value!r}")
    return tuple([float(beta_value)] * depth)


def _config_label(depth, scheme_dict, t_value, beta_value, lr=None) -> str:
    parts = [f"d{depth}", scheme_dict.get("name", "he_gnn")]
    if scheme_dict.get("name") == "explicit":
        parts[-1] += f"{scheme_dict.get('scale')}"
    if t_value is not None:
        parts.append(f"t{t_value['sum']}/L" if isinstance(t_value, dict) else f"t{t_value}")
    if beta_value is not None:
        parts.append(
            f"b{beta_value['rsqrt']}/rL" if isinstance(beta_value, dict) else f"b{beta_value}"
        )
    if lr is not None:
        parts.append(f"lr{lr}")
    return "_".join(parts)


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True)
    return hashlib.blake2s(canon.encode(), digest_size=4).hexdigest()


def make_architecture(
    op: AggregationOperator,
    n0: int,
    k: int,
    depth: int,
    hidden_width: int,
    scheme_dict: dict,
    t_value,
    beta_value,
) -> Architecture:
    scheme = parse_scheme(scheme_dict.get("name", "he_gnn"), scheme_dict.get("scale"))
    return Architecture(
        input_dim=n0,
        hidden_widths=tuple([hidden_width] * depth),
        output_dim=k,
        base_operator=op,
        schedule=_schedule(t_value, depth),
        betas=_betas(beta_value, depth),
        init=scheme,
    )


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(spec: ExperimentSpec, out: Path, seed: int) -> int:
    graph, provenance = build_dataset(spec, seed)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out / "graph.txt")
    provenance["format"] = {"name": "gnnlab-graph", "version": 1}
    provenance["master_seed"] = seed
    (out / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True))
    print(f"wrote {out / 'graph.txt'} ({graph.num_vertices} vertices, "
          f"{graph.num_edges} edges)")
    return EXIT_OK


def _diagnostic_configs(spec: ExperimentSpec):
    arch_spec = spec.architecture
    depths = arch_spec.get("depths", [arch_spec.get("depth", 4)])
    schemes = arch_spec.get("schemes")
    if schemes is None:
        schemes = [arch_spec.get("scheme", {"name": "he_gnn"})]
    ts = arch_spec.get("ts", [arch_spec.get("t")])
    betas = arch_spec.get("betas", [arch_spec.get("beta")])
    for depth in depths:
        for scheme_dict in schemes:
            for t_value in ts:
                for beta_value in betas:
                    yield int(depth), scheme_dict, t_value, beta_value


def cmd_diagnose(
    spec: ExperimentSpec, out: Path, seed: int, dump_spectrum: bool = False
) -> int:
    graph, _ = build_dataset(spec, seed)
    op = normalized_adjacency(graph, self_loops=True)
    diag = spec.diagnostics
    m = int(diag.get("samples", 200))
    metrics = diag.get("metrics", ["distortion", "oversmoothing", "class_condition"])
    hidden_width = int(spec.architecture.get("hidden_width", 64))
    x = graph.features
    unit_rows = bool(np.allclose(np.sum(x * x, axis=1), 1.0, atol=1e-9))
    diag_rows, bound_rows = [], []
    failures = 0
    for depth, scheme_dict, t_value, beta_value in _diagnostic_configs(spec):
        label = _config_label(depth, scheme_dict, t_value, beta_value)
        config_id = f"{label}#{_config_hash({'d': depth, 's': scheme_dict, 't': t_value, 'b': beta_value})}"
        try:
            arch = make_architecture(
                op, graph.num_features, graph.num_classes, depth, hidden_width,
                scheme_dict, t_value, beta_value,
            )
            k1 = diagnostics.exact_first_layer_cov(arch, x)
            tr_k1 = float(np.trace(k1))
            tr_k1_proj = float(np.trace(k1 @ op.projector))
            bounds = theory.trace_corridor(arch, tr_k1, tr_k1_proj)
            if "distortion" in metrics:
                summ = diagnostics.distortion_profile(arch, x, m, seed)
                diag_rows.append(
                    diagnostics.diagnostics_csv_row(
                        config_id, seed, depth, depth, "distortion",
                        summ.mean, summ.se, summ.q10, summ.q90, m,
                    )
                )
                if unit_rows and not arch.residual_mode:
                    scale = graph.num_features / graph.num_vertices
                    row = bounds.row(depth + 1)
                    bound_rows.append(
                        (config_id, seed, depth, depth, "distortion",
                         scale * row["trace_lower"], scale * row["trace_upper"])
                    )
            if "oversmoothing" in metrics:
                profile = diagnostics.oversmoothing_profile(arch, x, m, seed)
                for ell, r, se, rate in zip(
                    profile.layers, profile.ratios, profile.ratio_ses, profile.rates
                ):
                    diag_rows.append(
                        diagnostics.diagnostics_csv_row(
                            config_id, seed, depth, ell, "os_ratio", r, se,
                            seed_count=m,
                        )
                    )
                    diag_rows.append(
                        diagnostics.diagnostics_csv_row(
                            config_id, seed, depth, ell, "os_rate", rate,
                            se / max(1.0 - r, 1e-15), seed_count=m,
                        )
                    )
                for layer, lower, upper, _ in zip(
                    bounds.layers, bounds.ratio_lower, bounds.ratio_upper,
                    bounds.ratio_upper_vacuous,
                ):
                    if layer <= depth:
                        bound_rows.append(
                            (config_id, seed, depth, layer, "os_ratio", lower, upper)
                        )
            if "class_condition" in metrics:
                from .engine import forward, init_weights

                values = []
                for s in range(min(m, 50)):
                    state = init_weights(arch, seed=diagnostics.draw_seed(seed, s))
                    trace = forward(state, arch, x)
                    values.append(diagnostics.class_condition_number(trace, graph.labels))
                finite = [v for v in values if math.isfinite(v)]
                mean = float(np.mean(values)) if finite == values else math.inf
                diag_rows.append(
                    diagnostics.diagnostics_csv_row(
                        config_id, seed, depth, depth, "class_condition",
                        mean,
                        float(np.std(finite, ddof=1) / math.sqrt(len(finite)))
                        if len(finite) > 1 else math.nan,
                        # `nearest` sidesteps inf - inf interpolation when a
                        # draw collapsed to a rank-deficient class matrix.
                        float(np.quantile(values, 0.10, method="nearest")),
                        float(np.quantile(values, 0.90, method="nearest")),
                        len(values),
                    )
                )
        except (GNNLabError, ValueError) as exc:
            failures += 1
            print(f"config {config_id} failed: {exc}", file=sys.stderr)
            continue
    _write_csv(out / "diagnostics.csv", diagnostics.DIAGNOSTICS_CSV_COLUMNS, diag_rows)
    _write_csv(
        out / "bounds.csv",
        ("config", "master_seed", "depth", "layer", "metric", "lower", "upper"),
        bound_rows,
    )
    if dump_spectrum:
        _write_csv(out / "spectrum.csv", ("index", "eigenvalue"), spectrum_csv_rows(op))
    print(f"wrote {out / 'diagnostics.csv'} ({len(diag_rows)} rows; "
          f"{failures} config failures)")
    return EXIT_OK


def cmd_train(
    spec: ExperimentSpec,
    out: Path,
    seed: int,
    workers: int = 1,
    max_steps: int | None = None,
    select_best: bool = False,
) -> int:
    graph, _ = build_dataset(spec, seed)
    op = normalized_adjacency(graph, self_loops=True)
    tr = spec.training
    task = tr.get("task", "classification")
    protocol = tr.get("protocol", "performance")
    lrs = tr.get("lrs", [0.01])
    ts = tr.get("ts", [None])
    betas = tr.get("betas", [None])
    schemes = tr.get("schemes", [{"name": "he_gnn"}])
    depths = spec.architecture.get("depths", [spec.architecture.get("depth", 4)])
    hidden_width = int(spec.architecture.get("hidden_width", 64))
    num_seeds = int(tr.get("seeds", 15))
    steps = int(max_steps if max_steps is not None else tr.get("max_steps", 800))
    lr_drop = tr.get("lr_drop")
    threshold = tr.get("threshold")
    if threshold is None and protocol == "time-to-train":
        threshold = training.linear_baseline(graph, seed)
        print(f"linear baseline threshold: {threshold:.4f}")
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    jobs, records, skipped = [], [], 0
    for depth in depths:
        for scheme_dict in schemes:
            for t_value in ts:
                for beta_value in betas:
                    for lr in lrs:
                        label = _config_label(depth, scheme_dict, t_value, beta_value, lr)
                        payload = {
                            "d": depth, "s": scheme_dict, "t": t_value,
                            "b": beta_value, "lr": lr, "task": task,
                        }
                        config_id = f"{label}#{_config_hash(payload)}"
                        arch = make_architecture(
                            op, graph.num_features, graph.num_classes, int(depth),
                            hidden_width, scheme_dict, t_value, beta_value,
                        )
                        config = training.TrainConfig(
                            task=task,
                            lr=float(lr),
                            max_steps=steps,
                            lr_drop=tuple(lr_drop) if lr_drop else None,
                            stopping=protocol
                            if protocol in ("performance", "time-to-train")
                            else "performance",
                            threshold=threshold,
                        )
                        for job_seed in spawn_seeds(seed, config_id, num_seeds):
                            marker = runs_dir / f"{_config_hash(payload)}_{job_seed}.json"
                            if marker.exists():
                                records.append(_load_record(marker))
                                skipped += 1
                                continue
                            jobs.append(
                                (
                                    marker,
                                    training.SweepJob(
                                        config_id=config_id,
                                        graph=graph,
                                        arch=arch,
                                        train_config=config,
                                        seed=job_seed,
                                        threshold=threshold,
                                        depth=int(depth),
                                        t=None if t_value is None else
                                        (t_value["sum"] / depth if isinstance(t_value, dict) else float(t_value)),
                                        beta=None if beta_value is None else
                                        (beta_value["rsqrt"] / math.sqrt(depth) if isinstance(beta_value, dict) else float(beta_value)),
                                        cw_scale=scheme_dict.get("scale"),
                                    ),
                                )
                            )
    if jobs:
        result = training.sweep([job for _, job in jobs], workers=workers)
        for (marker, _), rec in zip(jobs, result.records):
            marker.write_text(json.dumps(_record_dict(rec), sort_keys=True))
            records.append(rec)
    rows = sorted(
        (training.result_csv_row(rec, seed) for rec in records),
        key=lambda r: (r[0], r[7]),
    )
    _write_csv(out / "results.csv", training.RESULT_CSV_COLUMNS, rows)
    summary = {"jobs_run": len(jobs), "jobs_skipped": skipped, "rows": len(rows)}
    if select_best and records:
        by_config: dict[str, list] = {}
        for rec in records:
            if not rec.diverged and math.isfinite(rec.best_val_acc):
                by_config.setdefault(rec.config_id, []).append(rec.best_val_acc)
        if by_config:
            means = {c: float(np.mean(v)) for c, v in by_config.items()}
            best = max(sorted(means), key=means.get)
            test_mean = float(
                np.mean([r.test_acc for r in records if r.config_id == best and not r.diverged])
            )
            summary["best_config"] = best
            summary["best_mean_val_acc"] = means[best]
            summary["best_mean_test_acc"] = test_mean
            print(f"best configuration: {best} "
                  f"(val {means[best]:.4f}, test {test_mean:.4f})")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"wrote {out / 'results.csv'} ({len(rows)} rows, {skipped} reused)")
    return EXIT_OK


def _record_dict(rec: training.SweepRecord) -> dict:
    d = rec.__dict__.copy()
    return d


def _load_record(path: Path) -> training.SweepRecord:
    data = json.loads(path.read_text())
    return training.SweepRecord(**data)


# ---------------------------------------------------------------------------
# verify-theory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # PASS | FAIL | INCONCLUSIVE
    detail: str


def _corridor_status(estimate, se, lower, upper) -> str:
    span = max(upper - lower, 0.0)
    violation = max(lower - estimate, estimate - upper, 0.0)
    if 3 * se > max(span, 1e-12):
        return "INCONCLUSIVE"
    return "PASS" if violation <= 3 * se else "FAIL"


def run_theory_suite(seed: int, samples: int, inject_bug: str | None = None):
    """The full verification suite; returns a list of CheckResult."""
    from .engine import init_weights  # local to keep import cycles away

    results: list[CheckResult] = []

    def add(name, status, detail=""):
        results.append(CheckResult(name=name, status=status, detail=detail))

    # Exact identity: the generalized He variance makes every multiplier 1.
    graph = theory._random_test_graph(12, seed)
    op = normalized_adjacency(graph, self_loops=True)
    arch = Architecture(
        input_dim=4, hidden_widths=(8, 8, 8, 8), output_dim=2, base_operator=op
    )
    a, cumulative = theory.layer_multipliers(arch)
    ok = all(abs(v - 1.0) <= 1e-15 for v in a) and abs(cumulative[-1] - 1.0) <= 1e-15
    add("he-variance-multiplier-identity", "PASS" if ok else "FAIL",
        f"max |a - 1| = {max(abs(v - 1.0) for v in a):.2e}")

    # Distributional lemmas.
    m_half = max(samples, 1000)
    for check in theory.check_lemma_half(
        m_half, seed, store_activated=(inject_bug == "double-relu")
    ):
        add(check.name, "PASS" if check.passed else "FAIL",
            f"ratio {check.estimate:.4f} +- {check.se:.4f}")
    gen = np.random.default_rng(seed)
    covs = []
    for _ in range(100):
        root = gen.normal(size=(2, 2))
        covs.append(root @ root.T)
    for check in theory.check_sigma_trick(covs, max(samples // 5, 2000), seed):
        if not check.passed:
            add(check.name, "FAIL", f"{check.estimate:.4f} vs {check.target:.4f}")
    add("sigma-trick-100-random-covariances", "PASS"
        if all(c.passed for c in theory.check_sigma_trick(covs, max(samples // 5, 2000), seed))
        else "FAIL")

    # Perron vectors and the interference inequality on random graphs.
    from .spectral import interference_bound, perron_basis

    bad = 0
    for i in range(20):
        g = theory._random_test_graph(10 + (i % 5), seed + 100 + i, edge_prob=0.5)
        p = normalized_adjacency(g, self_loops=True)
        try:
            basis = perron_basis(p)
            if p.top_multiplicity == 1:
                interference_bound(p)
            residual = np.max(np.abs(p.matrix @ basis - p.lam1 * basis))
            if residual > 1e-8:
                bad += 1
        except NumericError:
            bad += 1
    add("perron-and-interference-20-graphs", "PASS" if bad == 0 else "FAIL",
        f"{bad} failures")

    # Monte-Carlo trace corridor on a small architecture.
    x = graph.features
    for scheme_name, scheme in (("he", parse_scheme("he_gnn")),
                                ("explicit-1.0", parse_scheme("explicit", 1.0))):
        arch_s = Architecture(
            input_dim=4, hidden_widths=(8, 8, 8, 8), output_dim=2,
            base_operator=op, init=scheme,
        )
        m = max(min(samples // 100, 400), 2)
        estimates = diagnostics.estimate_covariances(arch_s, x, (2, 3, 4, 5), m, seed)
        k1 = diagnostics.exact_first_layer_cov(arch_s, x)
        bounds = theory.trace_corridor(
            arch_s, float(np.trace(k1)), float(np.trace(k1 @ op.projector))
        )
        statuses = []
        for est in estimates:
            row = bounds.row(est.layer)
            statuses.append(
                _corridor_status(est.trace, est.trace_se,
                                 row["trace_lower"], row["trace_upper"])
            )
        status = ("FAIL" if "FAIL" in statuses
                  else "INCONCLUSIVE" if "INCONCLUSIVE" in statuses else "PASS")
        add(f"trace-corridor-mc-{scheme_name}", status, ",".join(statuses))

    # Monte-Carlo oversmoothing lower bound per layer.
    m = max(min(samples // 100, 400), 2)
    profile = diagnostics.oversmoothing_profile(arch, x, m, seed)
    k1 = diagnostics.exact_first_layer_cov(arch, x)
    r1 = float(np.trace(k1 @ op.projector) / np.trace(k1))
    spectra = [(o.lam1, o.lam2, o.lam_min) for o in arch.operators]
    rows = theory.os_ratio_corridor(spectra, r1)
    worst = "PASS"
    for (layer, lower, _, _), r_hat, se in zip(
        rows, profile.ratios[1:], profile.ratio_ses[1:]
    ):
        if 3 * se > 1.0:
            worst = "INCONCLUSIVE" if worst == "PASS" else worst
        elif r_hat < lower - 3 * se:
            worst = "FAIL"
    add("oversmoothing-lower-bound-mc", worst,
        f"layers {[r[0] for r in rows]}")

    # Residual lower bound monotone in the total strength; corridor values
    # stay inside the unit interval over random spectra.
    lbs = [theory.residual_os_lower_bound(1.0, 0.71, [s / 10] * 10) for s in range(11)]
    add("residual-lower-bound-monotone",
        "PASS" if all(b >= a - 1e-15 for a, b in zip(lbs, lbs[1:])) else "FAIL")
    ok = True
    gen = np.random.default_rng(seed + 7)
    for _ in range(50):
        lam2 = gen.uniform(0.0, 1.0)
        lam_min = gen.uniform(0.01, lam2) if lam2 > 0.01 else 0.01
        r1_rand = gen.uniform(0.05, 1.0)
        rows = theory.os_ratio_corridor([(1.0, lam2, lam_min)] * 6, r1_rand)
        for _, lower, upper, _ in rows:
            if not (0.0 <= lower <= 1.0 + 1e-12 and 0.0 < upper <= 1.0):
                ok = False
    add("corridor-values-in-range", "PASS" if ok else "FAIL")

    # Spectral mapping of residual interpolation is exact.
    from .spectral import residual_operator

    res = residual_operator(op, 0.4)
    expected = np.sort(1.0 + 0.4 * (op.eigenvalues - 1.0))[::-1]
    err = float(np.max(np.abs(res.eigenvalues - expected)))
    add("residual-spectral-mapping", "PASS" if err <= 1e-9 else "FAIL",
        f"max err {err:.2e}")
    err = float(np.max(np.abs(res.projector - op.projector)))
    add("residual-projector-consistency", "PASS" if err <= 1e-8 else "FAIL",
        f"max err {err:.2e}")

    # Depth-1 gradient trace closed form.
    arch1 = Architecture(
        input_dim=4, hidden_widths=(8,), output_dim=2, base_operator=op
    )
    m = max(min(samples // 50, 200), 2)
    traces = diagnostics.gradient_covariance_trace(arch1, x, (1,), m, seed)
    est, se = traces[1]
    exact = arch1.weight_variances()[0] * 4 * graph.num_vertices
    # Point target: Monte-Carlo consistency at 3 SE (wide SE: inconclusive).
    if 3 * se > 0.5 * exact:
        status = "INCONCLUSIVE"
    else:
        status = "PASS" if abs(est - exact) <= 3 * se else "FAIL"
    add("gradient-trace-depth1-closed-form", status, f"{est:.4f} vs {exact:.4f}")
    return results


def cmd_verify_theory(seed: int, samples: int, inject_bug: str | None = None) -> int:
    results = run_theory_suite(seed, samples, inject_bug)
    width = max(len(r.name) for r in results)
    failed = False
    for r in results:
        print(f"{r.name:<{width}}  {r.status:<12} {r.detail}")
        failed = failed or r.status == "FAIL"
    print(f"{sum(r.status == 'PASS' for r in results)} passed, "
          f"{sum(r.status == 'FAIL' for r in results)} failed, "
          f"{sum(r.status == 'INCONCLUSIVE' for r in results)} inconclusive")
    return EXIT_NUMERIC if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnlab",
        description="Finite-width ReLU GNN initialization and oversmoothing laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "diagnose", "train", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="experiment spec (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--max-steps", type=int, default=None)
        if name == "diagnose":
            p.add_argument("--dump-spectrum", action="store_true")
    v = sub.add_parser("verify-theory")
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--samples", type=int, default=100_000)
    v.add_argument("--inject-bug", default=None, help=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-theory":
            return cmd_verify_theory(args.seed, args.samples, args.inject_bug)
        spec = ExperimentSpec.from_file(args.spec)
        seed = args.seed if args.seed is not None else spec.seed
        out = Path(args.out)
        if args.command == "generate":
            return cmd_generate(spec, out, seed)
        if args.command == "diagnose":
            return cmd_diagnose(spec, out, seed, dump_spectrum=args.dump_spectrum)
        if args.command == "train":
            return cmd_train(spec, out, seed, workers=args.workers,
                             max_steps=args.max_steps)
        if args.command == "sweep":
            return cmd_train(spec, out, seed, workers=args.workers,
                             max_steps=args.max_steps, select_best=True)
        raise ParameterError(f"unknown command {args.command}")
    except ParameterError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except GNNLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
