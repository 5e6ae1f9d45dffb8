"""Command line entry point: ``htaa run --plan plan.json --out results/``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from typing import Optional, Sequence

from htaa.benchmarks import BenchmarkFormatError, MissingEntryError
from htaa.harness.runner import load_plan, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htaa", description="Hyperparameter transfer across adjustments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment plan and write CSV/JSON reports")
    run.add_argument("--plan", required=True, help="plan JSON file")
    run.add_argument("--out", required=True, help="output directory for reports")
    run.add_argument("--seeds", type=int, help="override the plan's number of seeds")
    run.add_argument("--max-evals", type=int, help="override the plan's evaluation cutoff")
    run.add_argument("--experiment-seed", type=int, help="override the plan's experiment seed")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return parser


def _run(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    overrides = {}
    if args.seeds is not None:
        overrides["n_seeds"] = args.seeds
    if args.max_evals is not None:
        overrides["max_evals"] = args.max_evals
    if args.experiment_seed is not None:
        overrides["experiment_seed"] = args.experiment_seed
    if overrides:
        plan = dataclasses.replace(plan, **overrides)
    if args.jobs < 1:
        raise ValueError("--jobs must be positive")
    start = time.perf_counter()
    report = run_experiment(plan, args.out, jobs=args.jobs)
    n_tasks = len({(r[0], r[1]) for r in report.tables["speedup"]})
    print(f"wrote reports for {n_tasks} tasks to {args.out} in {time.perf_counter() - start:.1f}s")
    for s in plan.report_strategies:
        node = report.summary["speedup"][s]
        parts = []
        for b, by_ref in node.items():
            for r, agg in by_ref.items():
                g = agg["global"]
                parts.append(f"old={b} ref={r}: {'missing' if g is None else f'{g:.3f}'}")
        print(f"  {s:18s} " + ", ".join(parts))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
    except (OSError, ValueError, KeyError, BenchmarkFormatError, MissingEntryError) as exc:
        print(f"htaa: error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
