"""Command-line entry point: ``seedlab {run,sweep,oracle,removal}``.

Exit codes: 0 success, 1 input/config error, 2 budget refusal, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import BudgetExceeded, ConfigError, InputError
from ..instances import InstanceSpec, build_instance
from ..lloyd import LloydConfig
from ..oracle import (
    EnumerationBudget,
    RemovalExperimentConfig,
    brute_force_opt,
    exact_expected_cost,
    heavy_numbers,
    removal_experiment,
)
from ..seeding import STRATEGIES, VARIANTS, Algorithm
from .experiment import ExperimentConfig, format_summary, run_experiment, sweep

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--instance", default="simplex", help="simplex | three_point | gaussian | file")
    g.add_argument("--k", type=int, default=None, help="number of centers (default: instance's cluster count)")
    g.add_argument("--clusters", type=int, default=None, help="gaussian: number of blobs (default: --k)")
    g.add_argument("--n", type=int, default=1000, help="three_point: weight of the outer points")
    g.add_argument("--per-cluster", type=int, default=50)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--separation", type=float, default=100.0)
    g.add_argument("--stddev", type=float, default=1.0)
    g.add_argument("--instance-seed", type=int, default=0)
    g.add_argument("--path", default=None, help="dataset file for --instance file")


def _add_algo_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("algorithm")
    g.add_argument("--algo", default="plain", choices=VARIANTS)
    g.add_argument("--ell", type=int, default=1)
    g.add_argument("--eps1", type=float, default=0.0)
    g.add_argument("--eps2", type=float, default=0.0)
    g.add_argument("--strategy", default="identity", choices=STRATEGIES)
    g.add_argument("--pmix", type=float, default=0.5)
    g.add_argument("--greedy-first", action="store_true")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lloyd", action="store_true", help="refine every seeding with Lloyd's iterations")
    p.add_argument("--lloyd-iters", type=int, default=100)
    p.add_argument("--events", choices=("auto", "on", "off"), default="auto", help="replay traces for event statistics")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output directory")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seedlab", description="k-means++ seeding experiments")
    parser.add_argument("--config", default=None, help="file of key=value lines; values override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo trials of one configuration")
    _add_instance_args(run)
    _add_algo_args(run)
    _add_run_args(run)

    sw = sub.add_parser("sweep", help="repeat `run` along one parameter axis")
    _add_instance_args(sw)
    _add_algo_args(sw)
    _add_run_args(sw)
    sw.add_argument("--axis", required=True, help="name=v1,v2,... (ell, eps1, eps2, p_mix, strategy, k, trials)")

    orc = sub.add_parser("oracle", help="exact OPT and expected seeding cost on small instances")
    _add_instance_args(orc)
    _add_algo_args(orc)
    orc.add_argument("--what", choices=("opt", "expected", "both"), default="both")
    orc.add_argument("--budget", type=int, default=10**7, help="maximum enumerated outcomes")

    rem = sub.add_parser("removal", help="the number-removal process")
    rem.add_argument("--z", type=int, default=1024)
    rem.add_argument("--steps", type=int, default=None, help="removal steps (default z/2)")
    rem.add_argument("--eps", type=float, default=0.1)
    rem.add_argument("--adversary", default="remove_min", choices=("remove_min", "remove_max", "none"))
    rem.add_argument("--decrement", default="halve", choices=("none", "halve"))
    rem.add_argument("--numbers", default="ones", choices=("ones", "heavy"))
    rem.add_argument("--trials", type=int, default=10_000)
    rem.add_argument("--seed", type=int, default=0)
    rem.add_argument("--out", default=None)

    # --config may also follow the subcommand
    for p in (run, sw, orc, rem):
        p.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def apply_config_file(args: argparse.Namespace, sub: argparse.ArgumentParser, path: str) -> None:
    """Override parsed flags with ``key=value`` lines; '#' starts a comment."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ConfigError(f"{path}:{lineno}: {key} expects a boolean")
            setattr(args, dest, low in ("1", "true", "yes", "on"))
            continue
        try:
            converted = action.type(value) if action.type else value
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
        if action.choices is not None and converted not in action.choices:
            raise ConfigError(f"{path}:{lineno}: {key} must be one of {list(action.choices)}")
        setattr(args, dest, converted)


def instance_spec(args) -> InstanceSpec:
    kind = args.instance
    if kind in ("simplex", "simplex_lower_bound"):
        if args.k is None:
            raise ConfigError("the simplex instance needs --k")
        return InstanceSpec("simplex", {"k": args.k})
    if kind in ("three_point", "three_point_line"):
        return InstanceSpec("three_point", {"n": args.n})
    if kind in ("gaussian", "gaussian_mixture"):
        clusters = args.clusters if args.clusters is not None else args.k
        if clusters is None:
            raise ConfigError("the gaussian instance needs --k or --clusters")
        params = {
            "k": clusters,
            "per_cluster": args.per_cluster,
            "d": args.dim,
            "separation": args.separation,
            "stddev": args.stddev,
        }
        return InstanceSpec("gaussian", params, seed=args.instance_seed)
    if kind in ("file", "from_file"):
        return InstanceSpec("file", {"path": args.path})
    raise ConfigError(f"unknown instance {kind!r}")


def algorithm_from(args) -> Algorithm:
    return Algorithm(
        args.algo,
        ell=args.ell,
        eps1=args.eps1,
        eps2=args.eps2,
        strategy=args.strategy,
        p_mix=args.pmix,
        greedy_first=args.greedy_first,
    )


def experiment_config(args) -> ExperimentConfig:
    spec = instance_spec(args)
    if args.events == "auto":
        track = build_instance(spec).optimal_labels is not None
    else:
        track = args.events == "on"
    return ExperimentConfig(
        instance=spec,
        algorithm=algorithm_from(args),
        k=args.k,
        trials=args.trials,
        base_seed=args.seed,
        lloyd=LloydConfig(max_iters=args.lloyd_iters) if args.lloyd else None,
        out_dir=args.out,
        track_events=track,
        workers=args.workers,
    )


def _parse_axis(text: str) -> tuple[str, list[str]]:
    if "=" not in text:
        raise ConfigError("--axis must look like name=v1,v2,...")
    name, vals = text.split("=", 1)
    values = [v.strip() for v in vals.split(",") if v.strip()]
    name = {"pmix": "p_mix", "seed": "base_seed", "algo": "algorithm"}.get(name.strip(), name.strip())
    return name, values


def cmd_run(args) -> int:
    report = run_experiment(experiment_config(args))
    print(format_summary(report))
    return EXIT_OK


def cmd_sweep(args) -> int:
    axis, values = _parse_axis(args.axis)
    result = sweep(experiment_config(args), axis, values)
    for v, rep in zip(result.values, result.reports):
        print(f"== {axis} = {v}")
        print(format_summary(rep))
    metric = "ratio" if result.reports[0].aggregates.get("ratio") else "seed_cost"
    if len(set(result.values)) > 1 and all(isinstance(v, (int, float)) for v in result.values):
        rho, p = result.trend(metric)
        print(f"Spearman trend of {metric} along {axis}: rho = {rho:.4f}, one-sided p = {p:.3g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    X = build_instance(instance_spec(args))
    k = args.k if args.k is not None else X.n_clusters
    if k is None:
        raise ConfigError("--k is required for unlabeled instances")
    budget = EnumerationBudget(args.budget)
    out = {"dataset": X.name, "k": int(k)}
    if args.what in ("opt", "both"):
        opt, labels = brute_force_opt(X, k, budget)
        out["opt"] = opt
        out["labels"] = [int(x) for x in labels]
    if args.what in ("expected", "both"):
        algo = algorithm_from(args)
        out["algorithm"] = algo.describe()
        out["expected_seed_cost"] = exact_expected_cost(X, k, algo, budget)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_removal(args) -> int:
    steps = args.steps if args.steps is not None else args.z // 2
    numbers = heavy_numbers(args.z) if args.numbers == "heavy" else None
    cfg = RemovalExperimentConfig(
        z=args.z,
        steps=steps,
        eps=args.eps,
        numbers=numbers,
        adversary=args.adversary,
        decrement=args.decrement,
        trials=args.trials,
    )
    res = removal_experiment(cfg, seed=args.seed)
    summary = {
        "config": {
            "z": cfg.z,
            "steps": cfg.steps,
            "eps": cfg.eps,
            "adversary": cfg.adversary,
            "decrement": cfg.decrement,
            "numbers": args.numbers,
            "trials": cfg.trials,
            "seed": args.seed,
        },
        **res.summary,
        "stderr": res.stderr,
    }
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trials.jsonl", "w") as fh:
            for t, (a, rem, kept) in enumerate(zip(res.finals, res.removed_sums, res.remaining_sums)):
                fh.write(json.dumps({"trial": t, "final_average": float(a), "removed_sum": float(rem), "remaining_sum": float(kept)}, separators=(",", ":")) + "\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"removal z={cfg.z} steps={cfg.steps} eps={cfg.eps} adversary={cfg.adversary} decrement={cfg.decrement}\n"
        f"mean final average {res.mean_final_average:.6g} (se {res.stderr:.3g}) over {cfg.trials} trials; "
        f"{res.regime} bound {res.bound:.6g}"
    )
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle": cmd_oracle, "removal": cmd_removal}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        if getattr(args, "config", None):
            apply_config_file(args, _subparser(parser, args.command), args.config)
        return COMMANDS[args.command](args)
    except BudgetExceeded as exc:
        print(f"seedlab: refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InputError, np.linalg.LinAlgError) as exc:
        print(f"seedlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"seedlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
