"""Turning per-task results into metric tables and writing them to disk."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from htaa.harness.metrics import aggregate_geomean, failure_fraction, glass_delta, speedup, std_floor
from htaa.transfer import TRANSFER_STRATEGIES

COLUMNS = ("benchmark", "task", "strategy", "old_budget", "reference_budget", "value", "n_success", "n_fail")
TABLES = ("evals_to_target", "failure_rate", "speedup", "improvement")


@dataclass
class SpeedupReport:
    """Metric tables (one row list per table, columns ``COLUMNS``) plus aggregates."""

    tables: Dict[str, List[tuple]]
    summary: dict
    importance: dict = field(default_factory=dict)

    def rows(self, table: str, **match) -> List[dict]:
        out = []
        for row in self.tables[table]:
            d = dict(zip(COLUMNS, row))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out

    def global_value(self, metric: str, strategy: str, old_budget: int, reference_budget: int) -> Optional[float]:
        return self.summary[metric][strategy][str(old_budget)][str(reference_budget)]["global"]

    def benchmark_value(self, metric: str, strategy: str, old_budget: int, reference_budget: int,
                        benchmark: str) -> Optional[float]:
        node = self.summary[metric][strategy][str(old_budget)][str(reference_budget)]
        return node["benchmarks"][benchmark]

    def csv_text(self, table: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.tables[table]:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue()

    def write(self, out_dir: Union[str, os.PathLike]) -> None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for table in TABLES:
                (out / f"{table}.csv").write_text(self.csv_text(table))
            (out / "summary.json").write_text(_dumps(self.summary))
            (out / "importance.json").write_text(_dumps(self.importance))
        except OSError as exc:
            raise OSError(f"{out}: cannot write reports: {exc.strerror or exc}") from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _geomean_or_none(values: Sequence[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return aggregate_geomean(vals) if vals else None


def _mean_or_none(values: Sequence[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def build_report(plan, results) -> SpeedupReport:
    refs = sorted(set(plan.reference_budgets))
    old_budgets = sorted(set(plan.old_budgets))
    groups: List[Tuple[str, int]] = []
    for s in plan.report_strategies:
        groups.extend((s, b) for b in (old_budgets if s in TRANSFER_STRATEGIES else [0]))

    floor = std_floor(
        float(np.std(res.objectives[("tpe", 0)][r], ddof=1)) if plan.n_seeds > 1 else 0.0
        for res in results for r in refs
    )
    tables: Dict[str, List[tuple]] = {t: [] for t in TABLES}
    # (metric, strategy, old_budget, ref) -> benchmark -> task values
    per_bench: Dict[tuple, Dict[str, List[Optional[float]]]] = {}
    for res in results:
        control_counts = res.counts[("tpe", 0)]
        control_obj = res.objectives[("tpe", 0)]
        for s, b in groups:
            for r in refs:
                counts = res.counts[(s, b)][r]
                n_ok = sum(c is not None for c in counts)
                n_fail = len(counts) - n_ok
                key = (res.scenario, res.task, s, b, r)
                mean_count = float(np.mean([c for c in counts if c is not None])) if n_ok else None
                fail = failure_fraction(counts)
                sp = speedup(control_counts[r], counts)
                gd = glass_delta(res.objectives[(s, b)][r], control_obj[r], floor)
                tables["evals_to_target"].append(key + (mean_count, n_ok, n_fail))
                tables["failure_rate"].append(key + (fail, n_ok, n_fail))
                tables["speedup"].append(key + (sp, n_ok, n_fail))
                tables["improvement"].append(key + (gd, n_ok, n_fail))
                for metric, v in (("speedup", sp), ("failure_rate", fail), ("improvement", gd)):
                    per_bench.setdefault((metric, s, b, r), {}).setdefault(res.scenario, []).append(v)

    summary: dict = {
        "plan": plan.to_dict(),
        "std_floor": floor,
        "targets": {},
    }
    for res in results:
        summary["targets"].setdefault(res.scenario, {})[res.task] = {str(r): res.targets[r] for r in refs}
    for metric in ("speedup", "failure_rate", "improvement"):
        combine = _geomean_or_none if metric == "speedup" else _mean_or_none
        tree: dict = {}
        for s, b in groups:
            for r in refs:
                benches = per_bench[(metric, s, b, r)]
                bench_vals = {name: combine(vals) for name, vals in benches.items()}
                node = {"benchmarks": bench_vals, "global": combine(list(bench_vals.values()))}
                if metric == "speedup":
                    node["missing_tasks"] = sum(v is None for vals in benches.values() for v in vals)
                tree.setdefault(s, {}).setdefault(str(b), {})[str(r)] = node
        summary[metric] = tree

    importance: dict = {}
    for res in results:
        for b, shares in sorted(res.importance.items()):
            importance.setdefault(res.scenario, {}).setdefault(res.task, {})[str(b)] = shares
    return SpeedupReport(tables, summary, importance)
