"""Running optimisers on benchmarks and whole experiment plans."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from htaa.benchmarks import (
    ADJUSTMENT_KINDS,
    AdjustmentScenario,
    Benchmark,
    adjustment_kind_of,
    evaluate,
    load_tabular,
    synthetic_scenario,
)
from htaa.fanova import ImportanceReport
from htaa.harness.metrics import evals_to_target
from htaa.space import decompose
from htaa.tpe import History
from htaa.transfer import STRATEGIES, TRANSFER_STRATEGIES, TransferContext, make_strategy, old_importance

SEED_SCHEME = "htaa-seed-v1"
# a second, independently seeded TPE used as a seed-range control
CONTROL_ALIASES = {"tpe2": "tpe"}
KNOWN_STRATEGIES = STRATEGIES + tuple(CONTROL_ALIASES)


@dataclass(frozen=True)
class RunTrace:
    values: Tuple[float, ...]
    strategy: str
    seed: int
    task_id: str
    history: Optional[History] = field(default=None, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.values)


def derive_seed(experiment_seed: int, scenario: str, task: str, strategy: str, old_budget: int, index: int) -> int:
    """Stable 63-bit seed for one run, independent of scheduling and platform."""
    text = f"{SEED_SCHEME}|{experiment_seed}|{scenario}|{task}|{strategy}|{old_budget}|{index}"
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


class _Run:
    """An optimisation run that can be advanced step by step."""

    def __init__(self, strategy: str, benchmark: Benchmark, seed: int, ctx: Optional[TransferContext] = None,
                 importance_report: Optional[ImportanceReport] = None):
        base = CONTROL_ALIASES.get(strategy, strategy)
        if base not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(KNOWN_STRATEGIES)}")
        self.strategy = strategy
        self.benchmark = benchmark
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.suggest = make_strategy(base, benchmark.space, ctx, setup_rng=np.random.default_rng([seed, 1]),
                                     importance_report=importance_report)
        self.history = History(benchmark.space)
        self.trace: List[float] = []

    def step(self) -> float:
        config = self.suggest(self.history, self.rng)
        y = evaluate(self.benchmark, config)
        self.history.add(config, y, check=False)
        best = y if not self.trace else min(self.trace[-1], y)
        self.trace.append(best)
        return best

    def advance(self, budget: int, stop_at: Optional[float] = None, min_evals: int = 0) -> None:
        while len(self.trace) < budget:
            best = self.step()
            if stop_at is not None and best <= stop_at and len(self.trace) >= min_evals:
                break

    def result(self) -> RunTrace:
        return RunTrace(tuple(self.trace), self.strategy, self.seed, self.benchmark.task_id, self.history)


def run_hpo(strategy: str, benchmark: Benchmark, budget: int, seed: int, transfer_ctx: Optional[TransferContext] = None,
            *, stop_at: Optional[float] = None, min_evals: int = 0) -> RunTrace:
    """Optimise ``benchmark`` for ``budget`` evaluations (fewer if ``stop_at`` is reached).

    Runs stop early only once ``min_evals`` evaluations are done and the best
    value is at or below ``stop_at``.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    run = _Run(strategy, benchmark, seed, transfer_ctx)
    run.advance(budget, stop_at, min_evals)
    return run.result()


# -- plans -------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    """Either a synthetic kind (``kind`` set) or explicit (old, new) benchmark files."""

    name: str
    kind: Optional[str] = None
    n_tasks: int = 1
    task_seed: int = 0
    files: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ExperimentPlan:
    scenarios: Tuple[ScenarioSpec, ...]
    strategies: Tuple[str, ...] = STRATEGIES
    old_budgets: Tuple[int, ...] = (10, 20, 40)
    reference_budgets: Tuple[int, ...] = (10, 20, 40)
    n_seeds: int = 100
    max_evals: int = 400
    experiment_seed: int = 0

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ValueError("plan has no scenarios")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be unique")
        for s in self.strategies:
            if s not in KNOWN_STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}; choose from {', '.join(KNOWN_STRATEGIES)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("strategies listed twice")
        for label, budgets in (("old_budgets", self.old_budgets), ("reference_budgets", self.reference_budgets)):
            if not budgets or any(not isinstance(b, int) or b < 1 for b in budgets):
                raise ValueError(f"{label} must be a non-empty list of positive integers")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be positive")
        if self.max_evals < max(self.reference_budgets):
            raise ValueError("max_evals must be at least the largest reference budget")

    @property
    def report_strategies(self) -> Tuple[str, ...]:
        return ("tpe",) + tuple(s for s in self.strategies if s != "tpe")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"] = [
            {k: v for k, v in asdict(s).items() if v not in ((), None)} for s in self.scenarios
        ]
        return d


def _int(d: dict, key: str, default: Any, where: str) -> int:
    v = d.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValueError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def plan_from_dict(data: Any, base_dir: Union[str, os.PathLike] = ".") -> ExperimentPlan:
    """Build a plan from parsed plan JSON; relative file paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ValueError("plan: top level must be an object")
    raw = data.get("scenarios")
    if not isinstance(raw, list) or not raw:
        raise ValueError("plan.scenarios: expected a non-empty list")
    base = Path(base_dir)
    specs = []
    for i, item in enumerate(raw):
        where = f"plan.scenarios[{i}]"
        if isinstance(item, str):
            item = {"synthetic": item}
        if not isinstance(item, dict):
            raise ValueError(f"{where}: expected an object or a synthetic kind name")
        if "synthetic" in item:
            kind = item["synthetic"]
            if kind not in ADJUSTMENT_KINDS:
                raise ValueError(f"{where}.synthetic: unknown kind {kind!r}; choose from {', '.join(ADJUSTMENT_KINDS)}")
            n_tasks = _int(item, "tasks", 1, where)
            if n_tasks < 1:
                raise ValueError(f"{where}.tasks: must be positive")
            specs.append(ScenarioSpec(name=item.get("name", f"synthetic-{kind}"), kind=kind, n_tasks=n_tasks,
                                      task_seed=_int(item, "task_seed", 0, where)))
            continue
        tasks = item.get("tasks")
        if not isinstance(item.get("name"), str) or not isinstance(tasks, list) or not tasks:
            raise ValueError(f"{where}: file scenarios need a name and a non-empty tasks list")
        files = []
        for j, t in enumerate(tasks):
            if not isinstance(t, dict) or not isinstance(t.get("old"), str) or not isinstance(t.get("new"), str):
                raise ValueError(f"{where}.tasks[{j}]: expected {{\"old\": path, \"new\": path}}")
            files.append((str(base / t["old"]), str(base / t["new"])))
        specs.append(ScenarioSpec(name=item["name"], files=tuple(files)))
    strategies = data.get("strategies", list(STRATEGIES))
    if not isinstance(strategies, list) or not all(isinstance(s, str) for s in strategies):
        raise ValueError("plan.strategies: expected a list of names")

    def budgets(key: str) -> Tuple[int, ...]:
        v = data.get(key, [10, 20, 40])
        if not isinstance(v, list):
            raise ValueError(f"plan.{key}: expected a list of integers")
        return tuple(v)

    return ExperimentPlan(
        scenarios=tuple(specs),
        strategies=tuple(strategies),
        old_budgets=budgets("old_budgets"),
        reference_budgets=budgets("reference_budgets"),
        n_seeds=_int(data, "n_seeds", 100, "plan"),
        max_evals=_int(data, "max_evals", 400, "plan"),
        experiment_seed=_int(data, "experiment_seed", 0, "plan"),
    )


def load_plan(path: Union[str, os.PathLike]) -> ExperimentPlan:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"{path}: cannot read plan: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from None
    try:
        return plan_from_dict(data, path.parent)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def resolve_scenario(entry: ScenarioSpec) -> AdjustmentScenario:
    if entry.kind is not None:
        sc = synthetic_scenario(entry.kind, entry.task_seed, entry.n_tasks)
        return AdjustmentScenario(entry.name, sc.adjustment_kind, sc.tasks)
    tasks = []
    for old_path, new_path in entry.files:
        old, new = load_tabular(old_path), load_tabular(new_path)
        tasks.append((old, new))
    ids = [new.task_id for _, new in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError(f"scenario {entry.name}: task ids must be unique, got {ids}")
    kinds = {adjustment_kind_of(decompose(o.space, n.space)) for o, n in tasks}
    kind = kinds.pop() if len(kinds) == 1 else "mixed"
    return AdjustmentScenario(entry.name, kind, tuple(tasks))


# -- per-task execution --------------------------------------------------------

@dataclass
class TaskResult:
    """Raw per-task outcome: targets plus counts and objectives for every run group."""

    scenario: str
    task: str
    targets: Dict[int, float]
    # (strategy, old_budget) -> reference budget -> per-seed values
    counts: Dict[Tuple[str, int], Dict[int, List[Optional[int]]]]
    objectives: Dict[Tuple[str, int], Dict[int, List[float]]]
    importance: Dict[int, Dict[str, float]]


def _summarise(runs: Sequence[RunTrace], refs: Sequence[int], targets: Dict[int, float]):
    counts = {r: [evals_to_target(tr.values, targets[r]) for tr in runs] for r in refs}
    objectives = {r: [tr.values[r - 1] for tr in runs] for r in refs}
    return counts, objectives


def run_task(plan: ExperimentPlan, scenario: str, old: Benchmark, new: Benchmark) -> TaskResult:
    """The full protocol for one (old, new) task pair."""
    refs = sorted(set(plan.reference_budgets))
    max_ref = refs[-1]
    task = new.task_id
    seeds = range(plan.n_seeds)

    def seed(strategy: str, old_budget: int, i: int) -> int:
        return derive_seed(plan.experiment_seed, scenario, task, strategy, old_budget, i)

    # control: TPE first to the largest reference budget, targets from those traces
    control = [_Run("tpe", new, seed("tpe", 0, i)) for i in seeds]
    for run in control:
        run.advance(max_ref)
    targets = {r: float(np.mean([run.trace[r - 1] for run in control])) for r in refs}
    stop_at = min(targets.values())
    for run in control:
        run.advance(plan.max_evals, stop_at, max_ref)

    counts, objectives = {}, {}
    groups = {("tpe", 0): [run.result() for run in control]}

    old_budgets = sorted(set(plan.old_budgets))
    transfer = [s for s in plan.strategies if s in TRANSFER_STRATEGIES]
    importance_acc: Dict[int, List[Dict[str, float]]] = {}
    if transfer:
        old_runs = [run_hpo("tpe", old, old_budgets[-1], seed("old-tpe", 0, i)) for i in seeds]
    for strategy in plan.strategies:
        if strategy == "tpe":
            continue
        if strategy not in TRANSFER_STRATEGIES:
            runs = []
            for i in seeds:
                run = _Run(strategy, new, seed(strategy, 0, i))
                run.advance(plan.max_evals, stop_at, max_ref)
                runs.append(run.result())
            groups[(strategy, 0)] = runs
            continue
        for b in old_budgets:
            runs = []
            for i in seeds:
                hist = old_runs[i].history
                prefix = History._from_arrays(hist.space, hist.configs[:b], hist.X[:b], hist.y[:b])
                ctx = TransferContext(prefix, new.space)
                s = seed(strategy, b, i)
                report = None
                if strategy == "drop-unimportant":
                    report = old_importance(ctx, np.random.default_rng([s, 1]))
                    importance_acc.setdefault(b, []).append(report.individual)
                run = _Run(strategy, new, s, ctx, importance_report=report)
                run.advance(plan.max_evals, stop_at, max_ref)
                runs.append(run.result())
            groups[(strategy, b)] = runs

    for key, runs in groups.items():
        counts[key], objectives[key] = _summarise(runs, refs, targets)
    importance_mean = {
        b: {n: float(np.mean([rep[n] for rep in reps])) for n in reps[0]} for b, reps in importance_acc.items()
    }
    return TaskResult(scenario, task, targets, counts, objectives, importance_mean)


def _task_worker(args) -> TaskResult:
    plan, scenario_index, task_index = args
    sc = resolve_scenario(plan.scenarios[scenario_index])
    old, new = sc.tasks[task_index]
    return run_task(plan, sc.name, old, new)


def run_experiment(plan: ExperimentPlan, out_dir: Optional[Union[str, os.PathLike]] = None, jobs: int = 1):
    """Run every task of ``plan`` and build (and optionally write) the report.

    Tasks run in parallel over ``jobs`` processes; results are joined in plan
    order, so the reports do not depend on scheduling.
    """
    from htaa.harness.report import build_report

    scenarios = [resolve_scenario(s) for s in plan.scenarios]
    units = [(plan, si, ti) for si, sc in enumerate(scenarios) for ti in range(len(sc.tasks))]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task_worker, units))
    else:
        results = [run_task(plan, scenarios[si].name, *scenarios[si].tasks[ti]) for _, si, ti in units]
    report = build_report(plan, results)
    if out_dir is not None:
        report.write(out_dir)
    return report
