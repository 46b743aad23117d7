"""Command-line interface: fit, simulate, select-weight, benchmark.

Emits plot-ready CSV tables by default; --json switches to a single
JSON document. Exit codes: 0 success, 1 runtime error (machine-readable
JSON on stderr), 2 flag misuse.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import DatasetSchema, load_builtin, load_csv
from .em import EmConfig, SupervisionWeight, em_fit, init_from_partition, kmeans_partition
from .exceptions import FscError
from .metrics import ari
from .simulate import (
    ExperimentConfig,
    MaskSpec,
    ResultTable,
    SimSpec,
    STRATEGIES,
    mask_labels,
    run_experiment,
)
from .weights import LambdaGrid, lambda_max, lambda_n2, select_ari_oracle, select_kl

SEED_ENV = "FSC_SEED"


class UsageError(Exception):
    """Flag misuse: reported on stderr with exit code 2."""


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--jobs", type=int, default=None,
                   help="max concurrent replicates (default: available cores)")
    p.add_argument("--out", type=str, default=None,
                   help="output file prefix; default prints to stdout")
    p.add_argument("--json", action="store_true", dest="as_json",
                   help="emit a single JSON document instead of CSV")
    p.add_argument("--dry-run", action="store_true",
                   help="validate flags and print the resolved plan only")


def _add_data_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", type=str, default=None, help="CSV file with features + class column")
    p.add_argument("--dataset", type=str, default=None,
                   help="builtin dataset name: iris, wine, or crabs")
    p.add_argument("--class-col", type=str, default=None)
    p.add_argument("--feature-cols", type=str, default=None,
                   help="comma-separated feature column names (default: all others)")
    p.add_argument("--standardize", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsc",
        description="Fractionally-supervised classification: weighted-likelihood "
                    "EM for Gaussian mixtures with a tunable supervision weight.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one model on a labelled CSV")
    _add_data_flags(fit)
    fit.add_argument("--components", type=int, default=None)
    fit.add_argument("--lambda", dest="lam", type=float, default=None)
    fit.add_argument("--lambda-strategy", type=str, default=None,
                     choices=list(STRATEGIES))
    fit.add_argument("--grid", type=str, default="0:1:0.1")
    fit.add_argument("--labelled-frac", type=float, default=None)
    fit.add_argument("--p", type=float, default=None,
                     help="labelled percentage (alternative to --labelled-frac)")
    _add_common(fit)

    sim = sub.add_parser("simulate", help="replicated synthetic sweep")
    sim.add_argument("--delta", type=str, default="1",
                     help="group separation(s), comma separated")
    sim.add_argument("--n", type=int, default=300)
    sim.add_argument("--pi", type=float, default=0.5)
    sim.add_argument("--p", type=str, default="10",
                     help="labelled percentage(s), comma separated")
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--grid", type=str, default="0:1:0.1")
    sim.add_argument("--bias", action="store_true",
                     help="biased labelling instead of random masking")
    sim.add_argument("--strategies", type=str, default="",
                     help=f"comma separated subset of {','.join(STRATEGIES)}")
    _add_common(sim)

    sel = sub.add_parser("select-weight", help="choose a supervision weight")
    _add_data_flags(sel)
    sel.add_argument("--components", type=int, default=None)
    sel.add_argument("--strategy", type=str, required=True, choices=list(STRATEGIES))
    sel.add_argument("--grid", type=str, default="0:1:0.1")
    sel.add_argument("--labelled-frac", type=float, default=None)
    sel.add_argument("--p", type=float, default=None)
    _add_common(sel)

    bench = sub.add_parser("benchmark", help="replicated masking sweep on real data")
    _add_data_flags(bench)
    bench.add_argument("--components", type=int, default=None)
    bench.add_argument("--p", type=str, default="10,20,30,40,50,60,70,80,90")
    bench.add_argument("--reps", type=int, default=100)
    bench.add_argument("--grid", type=str, default="0:1:0.1")
    bench.add_argument("--strategies", type=str, default=",".join(STRATEGIES))
    _add_common(bench)

    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def _resolve_jobs(args) -> int:
    if args.jobs is None:
        return os.cpu_count() or 1
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
    return args.jobs


def _load_data(args):
    if (args.data is None) == (args.dataset is None):
        raise UsageError("exactly one of --data or --dataset is required")
    if args.dataset is not None:
        return load_builtin(args.dataset, standardized=args.standardize)
    if args.class_col is None:
        raise UsageError("--class-col is required with --data")
    features = tuple(
        c.strip() for c in args.feature_cols.split(",")
    ) if args.feature_cols else ()
    schema = DatasetSchema(
        class_col=args.class_col, feature_cols=features, standardize=args.standardize
    )
    return load_csv(args.data, schema)


def _resolve_fraction(args) -> float:
    if args.labelled_frac is not None and args.p is not None:
        raise UsageError("give either --labelled-frac or --p, not both")
    if args.labelled_frac is not None:
        frac = args.labelled_frac
    elif args.p is not None:
        frac = args.p / 100.0
    else:
        return 1.0
    if not 0.0 < frac <= 1.0:
        raise UsageError(
            f"labelled fraction must lie in (0, 1], got {frac}"
        )
    return frac


def _parse_float_list(text: str, name: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of numbers") from None


def _print(text: str, out: str | None, suffix: str):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(f"{out}{suffix}").write_text(text, encoding="utf-8")


def _write_tables(table: ResultTable, args):
    if args.as_json:
        doc = {
            "aggregate": table.aggregate_csv(),
            "strategies": table.strategy_csv(),
            "runs": table.runs_csv(),
        }
        if table.kl_records:
            doc["kl"] = table.kl_csv()
        _print(json.dumps(doc, indent=2) + "\n", args.out, ".json")
        return
    if args.out is None:
        sys.stdout.write(table.aggregate_csv())
        return
    _print(table.runs_csv(), args.out, "_runs.csv")
    _print(table.aggregate_csv(), args.out, "_aggregate.csv")
    _print(table.strategy_csv(), args.out, "_strategies.csv")
    if table.kl_records:
        _print(table.kl_csv(), args.out, "_kl.csv")


def _check_lambda(lam: float):
    if not 0.0 <= lam <= 1.0:
        raise UsageError(f"--lambda must lie in [0, 1], got {lam}")


def _cmd_fit(args) -> int:
    if (args.lam is None) == (args.lambda_strategy is None):
        raise UsageError("exactly one of --lambda or --lambda-strategy is required")
    if args.lam is not None:
        _check_lambda(args.lam)
    seed = _resolve_seed(args)
    frac = _resolve_fraction(args)
    grid = LambdaGrid.from_spec(args.grid)
    if args.dry_run:
        plan = {"command": "fit", "lambda": args.lam,
                "strategy": args.lambda_strategy, "labelled_frac": frac,
                "grid": list(grid), "seed": seed}
        print(json.dumps(plan, indent=2))
        return 0
    X, truth, class_names = _load_data(args)
    G = args.components if args.components is not None else len(class_names)
    split = mask_labels(truth, X, MaskSpec(frac, "random"),
                        seed=np.random.SeedSequence(seed, spawn_key=(0, 1)))
    dataset = split.dataset
    cfg = EmConfig(epsilon=args.epsilon, max_iter=args.max_iter,
                   restarts=args.restarts, seed=seed)
    n1, n2 = dataset.n_labelled, dataset.n_unlabelled

    strategy = args.lambda_strategy
    diagnostics = None
    if strategy is None:
        lam = args.lam
    elif strategy == "n2":
        lam = lambda_n2(n1, n2)
    elif strategy == "max":
        lam = lambda_max(n1, n2)
    elif strategy in ("kl1", "kl2"):
        choice = select_kl(dataset, G, grid, strategy, cfg)
        lam, diagnostics = choice.value, choice.diagnostics
    else:  # ari-oracle
        rng = np.random.default_rng(seed)
        partition = kmeans_partition(dataset.pooled(), G, args.restarts, rng)
        fits = {}
        for lam_g in grid:
            w = SupervisionWeight(lam_g)
            init = init_from_partition(dataset, partition, w, G)
            local = EmConfig(epsilon=args.epsilon, max_iter=args.max_iter,
                             restarts=args.restarts, seed=seed, init_params=init)
            fits[lam_g] = em_fit(dataset, G, w, local)
        choice = select_ari_oracle(fits, truth[split.unlabelled_idx])
        lam, diagnostics = choice.value, choice.diagnostics

    fit = em_fit(dataset, G, SupervisionWeight(lam), cfg)
    score = None
    if dataset.n_unlabelled >= 2:
        score = ari(truth[split.unlabelled_idx], fit.hard_assignments)

    if args.as_json:
        doc = {
            "command": "fit",
            "lambda": lam,
            "strategy": strategy,
            "n_components": G,
            "classes": class_names,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "wll_trace": fit.wll_trace,
            "weights": fit.params.weights.tolist(),
            "means": fit.params.means.tolist(),
            "covariances": fit.params.covariances.tolist(),
            "ari_unlabelled": score,
            "assignments": [
                {"row": int(r), "class_index": int(g),
                 "class": class_names[g] if g < len(class_names) else str(g),
                 "responsibilities": fit.resp[j].tolist()}
                for j, (r, g) in enumerate(
                    zip(split.unlabelled_idx, fit.hard_assignments))
            ],
        }
        if diagnostics is not None:
            doc["selection"] = {str(k): v for k, v in diagnostics.items()}
        _print(json.dumps(doc, indent=2) + "\n", args.out, ".json")
    else:
        lines = ["row,assigned_class_index,assigned_class,"
                 + ",".join(f"resp_{g}" for g in range(G))]
        for j, (r, g) in enumerate(zip(split.unlabelled_idx, fit.hard_assignments)):
            name = class_names[g] if g < len(class_names) else str(g)
            resp = ",".join(repr(float(v)) for v in fit.resp[j])
            lines.append(f"{int(r)},{int(g)},{name},{resp}")
        _print("\n".join(lines) + "\n", args.out, "_assignments.csv")
    return 0


def _cmd_simulate(args) -> int:
    if args.reps < 1:
        raise UsageError(f"--reps must be >= 1, got {args.reps}")
    if args.n < 2:
        raise UsageError(f"--n must be >= 2, got {args.n}")
    deltas = _parse_float_list(args.delta, "--delta")
    ps_pct = _parse_float_list(args.p, "--p")
    for p in ps_pct:
        if not 0.0 < p <= 100.0:
            raise UsageError(f"--p values must lie in (0, 100], got {p}")
    grid = LambdaGrid.from_spec(args.grid)
    strategies = tuple(s for s in args.strategies.split(",") if s)
    for s in strategies:
        if s not in STRATEGIES:
            raise UsageError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
    seed = _resolve_seed(args)
    jobs = _resolve_jobs(args)
    plan = {
        "command": "simulate", "deltas": deltas, "n": args.n, "pi": args.pi,
        "p_percent": ps_pct, "reps": args.reps, "grid": list(grid),
        "mode": "biased" if args.bias else "random",
        "strategies": list(strategies), "seed": seed, "jobs": jobs,
    }
    if args.dry_run:
        print(json.dumps(plan, indent=2))
        return 0
    table = ResultTable()
    for delta in deltas:
        cfg = ExperimentConfig(
            ps=tuple(p / 100.0 for p in ps_pct),
            grid=grid,
            sim=SimSpec(n=args.n, delta=delta, pi=args.pi),
            reps=args.reps,
            strategies=strategies,
            mode="biased" if args.bias else "random",
            seed=seed,
            epsilon=args.epsilon,
            max_iter=args.max_iter,
            restarts=args.restarts,
            jobs=jobs,
        )
        part = run_experiment(cfg)
        table.rows.extend(part.rows)
        table.kl_records.extend(part.kl_records)
    _write_tables(table, args)
    return 0


def _cmd_select_weight(args) -> int:
    seed = _resolve_seed(args)
    frac = _resolve_fraction(args)
    grid = LambdaGrid.from_spec(args.grid)
    if args.dry_run:
        print(json.dumps({"command": "select-weight", "strategy": args.strategy,
                          "labelled_frac": frac, "grid": list(grid),
                          "seed": seed}, indent=2))
        return 0
    X, truth, class_names = _load_data(args)
    G = args.components if args.components is not None else len(class_names)
    split = mask_labels(truth, X, MaskSpec(frac, "random"),
                        seed=np.random.SeedSequence(seed, spawn_key=(0, 1)))
    dataset = split.dataset
    cfg = EmConfig(epsilon=args.epsilon, max_iter=args.max_iter,
                   restarts=args.restarts, seed=seed)
    n1, n2 = dataset.n_labelled, dataset.n_unlabelled
    strategy = args.strategy
    diagnostics = {}
    if strategy == "n2":
        lam = lambda_n2(n1, n2)
    elif strategy == "max":
        lam = lambda_max(n1, n2)
    elif strategy in ("kl1", "kl2"):
        choice = select_kl(dataset, G, grid, strategy, cfg)
        lam, diagnostics = choice.value, choice.diagnostics
    else:  # ari-oracle
        rng = np.random.default_rng(seed)
        partition = kmeans_partition(dataset.pooled(), G, args.restarts, rng)
        fits = {}
        for lam_g in grid:
            w = SupervisionWeight(lam_g)
            init = init_from_partition(dataset, partition, w, G)
            local = EmConfig(epsilon=args.epsilon, max_iter=args.max_iter,
                             restarts=args.restarts, seed=seed, init_params=init)
            fits[lam_g] = em_fit(dataset, G, w, local)
        choice = select_ari_oracle(fits, truth[split.unlabelled_idx])
        lam, diagnostics = choice.value, choice.diagnostics

    if args.as_json:
        doc = {"command": "select-weight", "strategy": strategy, "lambda": lam,
               "n_labelled": n1, "n_unlabelled": n2,
               "diagnostics": {str(k): v for k, v in diagnostics.items()}}
        _print(json.dumps(doc, indent=2) + "\n", args.out, ".json")
    else:
        lines = ["strategy,lambda", f"{strategy},{repr(float(lam))}"]
        _print("\n".join(lines) + "\n", args.out, "_choice.csv")
    return 0


def _cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise UsageError(f"--reps must be >= 1, got {args.reps}")
    ps_pct = _parse_float_list(args.p, "--p")
    for p in ps_pct:
        if not 0.0 < p <= 100.0:
            raise UsageError(f"--p values must lie in (0, 100], got {p}")
    grid = LambdaGrid.from_spec(args.grid)
    strategies = tuple(s for s in args.strategies.split(",") if s)
    for s in strategies:
        if s not in STRATEGIES:
            raise UsageError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
    seed = _resolve_seed(args)
    jobs = _resolve_jobs(args)
    if args.dry_run:
        print(json.dumps({
            "command": "benchmark", "data": args.data or args.dataset,
            "p_percent": ps_pct, "reps": args.reps, "grid": list(grid),
            "strategies": list(strategies), "seed": seed, "jobs": jobs,
        }, indent=2))
        return 0
    X, truth, _ = _load_data(args)
    cfg = ExperimentConfig(
        ps=tuple(p / 100.0 for p in ps_pct),
        grid=grid,
        dataset=(X, truth),
        reps=args.reps,
        strategies=strategies,
        mode="random",
        seed=seed,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        restarts=args.restarts,
        jobs=jobs,
    )
    table = run_experiment(cfg)
    _write_tables(table, args)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "select-weight":
            return _cmd_select_weight(args)
        return _cmd_benchmark(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FscError as exc:
        doc = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(doc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
