"""Monte Carlo trials, aggregates, and the files they produce."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import Dataset
from ..errors import BudgetExceeded, ConfigError
from ..instances import InstanceSpec, build_instance
from ..lloyd import LloydConfig, lloyd_refine
from ..oracle import EnumerationBudget, brute_force_opt
from ..rng import SeedStreams
from ..seeding import Algorithm
from .events import verify_trace_events
from .stats import mean_ci, spearman_increasing

ORACLE_SITE_LIMIT = 12
NUMERIC_FIELDS = ("seed_cost", "lloyd_cost", "ratio", "lloyd_ratio", "wasted", "psi")


@dataclass
class ExperimentConfig:
    instance: InstanceSpec
    algorithm: Algorithm = field(default_factory=Algorithm)
    k: int | None = None
    trials: int = 1000
    base_seed: int = 0
    lloyd: LloydConfig | None = None
    out_dir: str | Path | None = None
    track_events: bool = False
    workers: int = 1

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if int(self.base_seed) != self.base_seed or self.base_seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.k is not None and (int(self.k) != self.k or self.k < 1):
            raise ConfigError("k must be a positive integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")

    def resolved_k(self, X: Dataset) -> int:
        if self.k is not None:
            return int(self.k)
        if X.n_clusters is not None:
            return X.n_clusters
        raise ConfigError("k is required for unlabeled instances")

    def to_dict(self) -> dict:
        # workers and out_dir do not affect results, so they stay out of the summary
        return {
            "instance": self.instance.to_dict(),
            "algorithm": self.algorithm.describe(),
            "k": self.k,
            "trials": int(self.trials),
            "base_seed": int(self.base_seed),
            "lloyd": dataclasses.asdict(self.lloyd) if self.lloyd else None,
            "track_events": bool(self.track_events),
        }


@dataclass
class OptReference:
    value: float | None
    source: str | None  # stored | oracle | labeling | None
    is_upper_bound: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExperimentReport:
    config: dict
    dataset: str
    k: int
    opt: OptReference
    rows: list[dict]
    aggregates: dict

    def summary(self) -> dict:
        return {"config": self.config, "dataset": self.dataset, "k": self.k, "opt": self.opt.to_dict(), "aggregates": self.aggregates}

    def column(self, name: str) -> list:
        if name in ("F", "o_hit"):
            return [r["events"][name] for r in self.rows]
        return [r.get(name) for r in self.rows]


def resolve_opt(X: Dataset, k: int, budget: EnumerationBudget | None = None) -> OptReference:
    """Ratio denominator: exact stored value, then the oracle on tiny inputs, then a flagged labeling cost."""
    if X.optimal_cost is not None and X.optimal_is_exact and X.n_clusters == k:
        return OptReference(float(X.optimal_cost), "stored", False)
    if X.n_sites <= ORACLE_SITE_LIMIT:
        try:
            return OptReference(float(brute_force_opt(X, k, budget)[0]), "oracle", False)
        except BudgetExceeded:
            pass
    if X.optimal_labels is not None and X.n_clusters == k:
        value = X.optimal_cost if X.optimal_cost is not None else X.labeling_cost()
        return OptReference(float(value), "labeling", True)
    return OptReference(None, None, False)


def _ratio(cost: float, opt: OptReference):
    if opt.value is None or opt.value <= 0.0:
        return None
    return cost / opt.value


def _trial_rows(X, k, algorithm, base_seed, lloyd, track_events, opt, trial_ids) -> list[dict]:
    root = SeedStreams(base_seed)
    rows = []
    for t in trial_ids:
        C, trace = algorithm.seed(X, k, root.for_trial(t))
        seed_cost = float(C.total_potential)
        row = {"trial": int(t), "seed_cost": seed_cost}
        if lloyd is not None:
            _, _, costs = lloyd_refine(X, C, lloyd)
            row["lloyd_cost"] = costs[-1]
        r = _ratio(seed_cost, opt)
        if r is not None:
            row["ratio"] = r
            if lloyd is not None:
                row["lloyd_ratio"] = _ratio(row["lloyd_cost"], opt)
            row["ratio_is_upper_bound"] = opt.is_upper_bound
        events = {"F": None, "o_hit": None}
        if track_events:
            ev = verify_trace_events(trace, X)
            row["wasted"], row["psi"] = ev.wasted_count, ev.psi
            events = {"F": ev.F, "o_hit": ev.o_hit}
        else:
            row["wasted"], row["psi"] = trace.wasted_count, trace.psi
        row["events"] = events
        rows.append(row)
    return rows


def aggregate(rows: list[dict]) -> dict:
    """Aggregates computed from the rows alone."""
    out = {}
    for name in NUMERIC_FIELDS:
        vals = [r[name] for r in rows if r.get(name) is not None]
        if vals:
            out[name] = mean_ci(vals)
    for name in ("F", "o_hit"):
        vals = [r["events"][name] for r in rows if r["events"][name] is not None]
        if vals:
            out[f"freq_{name}"] = {"n": len(vals), "hits": int(sum(vals)), "freq": sum(vals) / len(vals)}
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    X = build_instance(cfg.instance)
    k = cfg.resolved_k(X)
    if cfg.track_events and X.optimal_labels is None:
        raise ConfigError("event tracking needs a labeled instance")
    if cfg.algorithm.name == "noisy" and cfg.algorithm.strategy == "boost_covered" and X.optimal_labels is None:
        raise ConfigError("boost_covered needs a labeled instance")
    opt = resolve_opt(X, k)
    args = (X, k, cfg.algorithm, int(cfg.base_seed), cfg.lloyd, cfg.track_events, opt)
    ids = list(range(int(cfg.trials)))
    if cfg.workers > 1 and len(ids) > 1:
        chunks = [c.tolist() for c in np.array_split(ids, min(cfg.workers * 4, len(ids)))]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_trial_rows, *zip(*[args + (c,) for c in chunks]))
            rows = [r for part in parts for r in part]
        rows.sort(key=lambda r: r["trial"])
    else:
        rows = _trial_rows(*args, ids)
    report = ExperimentReport(cfg.to_dict(), X.name, k, opt, rows, aggregate(rows))
    if cfg.out_dir is not None:
        write_report(report, cfg.out_dir)
    return report


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=False, separators=(",", ":"))


def write_report(report: ExperimentReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.jsonl", "w") as fh:
        for row in report.rows:
            fh.write(_dumps(row) + "\n")
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=2) + "\n")


def format_summary(report: ExperimentReport) -> str:
    lines = [f"{report.dataset}  k={report.k}  algorithm={report.config['algorithm']}"]
    if report.opt.value is not None:
        flag = " (upper bound)" if report.opt.is_upper_bound else ""
        lines.append(f"OPT = {report.opt.value:.6g} [{report.opt.source}]{flag}")
    for name, agg in report.aggregates.items():
        if "mean" in agg:
            lines.append(
                f"{name:>12}: mean {agg['mean']:.6g}  sd {agg['std']:.4g}  95% CI [{agg['ci_low']:.6g}, {agg['ci_high']:.6g}]  n={agg['n']}"
            )
        else:
            lines.append(f"{name:>12}: {agg['hits']}/{agg['n']} = {agg['freq']:.4f}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# sweeps

ALGORITHM_AXES = {"ell": int, "eps1": float, "eps2": float, "p_mix": float, "strategy": str, "algorithm": str}
CONFIG_AXES = {"k": int, "trials": int, "base_seed": int}


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list[ExperimentReport]
    table: list[dict]

    def trend(self, metric: str = "ratio") -> tuple[float, float]:
        """Spearman correlation between the axis value and per-trial ``metric`` (one-sided, increasing)."""
        xs, ys = [], []
        for v, rep in zip(self.values, self.reports):
            col = [c for c in rep.column(metric) if c is not None]
            xs += [v] * len(col)
            ys += [float(c) for c in col]
        return spearman_increasing(xs, ys)


def _with_axis(template: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis in ALGORITHM_AXES:
        value = ALGORITHM_AXES[axis](value)
        key = "name" if axis == "algorithm" else axis
        algo = dataclasses.replace(template.algorithm, **{key: value})
        return dataclasses.replace(template, algorithm=algo, out_dir=None)
    if axis in CONFIG_AXES:
        return dataclasses.replace(template, **{axis: CONFIG_AXES[axis](value)}, out_dir=None)
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted({**ALGORITHM_AXES, **CONFIG_AXES})}")


def _table_row(axis: str, value, rep: ExperimentReport) -> dict:
    row = {axis: value, "trials": len(rep.rows)}
    for name in NUMERIC_FIELDS:
        agg = rep.aggregates.get(name)
        row[f"mean_{name}"] = agg["mean"] if agg else ""
        row[f"{name}_ci_low"] = agg["ci_low"] if agg else ""
        row[f"{name}_ci_high"] = agg["ci_high"] if agg else ""
    row["ratio_is_upper_bound"] = rep.opt.is_upper_bound if rep.opt.value is not None else ""
    for name in ("F", "o_hit"):
        agg = rep.aggregates.get(f"freq_{name}")
        row[f"freq_{name}"] = agg["freq"] if agg else ""
    return row


def sweep(template: ExperimentConfig, axis: str, values) -> SweepResult:
    values = list(values)
    if not values:
        raise ConfigError("sweep axis has no values")
    configs = [_with_axis(template, axis, v) for v in values]  # validate all before running any
    values = [ALGORITHM_AXES.get(axis, CONFIG_AXES.get(axis))(v) for v in values]
    reports = []
    for v, cfg in zip(values, configs):
        if template.out_dir is not None:
            cfg = dataclasses.replace(cfg, out_dir=Path(template.out_dir) / f"{axis}={v}")
        reports.append(run_experiment(cfg))
    table = [_table_row(axis, v, rep) for v, rep in zip(values, reports)]
    if template.out_dir is not None:
        out = Path(template.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(table)
    return SweepResult(axis, values, reports, table)


def default_workers() -> int:
    return max(1, min(8, (os.cpu_count() or 1)))
