"""Objective providers: tabular benchmark files and synthetic adjustment scenarios.

Benchmark file layout (one file per benchmark and task)::

    {
      "name": "svm-b",
      "task": "3",                      # optional, defaults to the file stem
      "space": [
        {"name": "cost", "type": "logfloat", "lo": 0.03125, "hi": 32.0},
        {"name": "kernel", "type": "categorical", "choices": ["poly", "linear", "rbf"]}
      ],
      "entries": [
        {"config": {"cost": 1.0, "kernel": "rbf"}, "objective": 0.12},
        ...
      ]
    }

Discrete-only spaces are exact lookup tables. When a space has float
dimensions the table is treated as a grid and a query resolves to the nearest
entry that agrees on every discrete dimension (distance measured in the unit
encoding, i.e. in log space for log-uniform domains).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from htaa.space import (
    Categorical,
    Configuration,
    Domain,
    LogUniformFloat,
    SearchSpace,
    SpaceDecomposition,
    UniformFloat,
    UniformInt,
    decompose,
    validate,
)

ADJUSTMENT_KINDS = ("homogeneous", "hp-add", "hp-remove", "range-add", "range-remove", "mixed")


class BenchmarkFormatError(ValueError):
    """A benchmark file does not follow the documented schema."""


class MissingEntryError(KeyError):
    """A tabular benchmark has no entry for the requested configuration."""


@dataclass(frozen=True, eq=False)
class Benchmark:
    name: str
    space: SearchSpace
    oracle: Callable[[Configuration], float]
    task_id: str = "0"
    optimum: Optional[Configuration] = None
    min_value: Optional[float] = None


@dataclass(frozen=True)
class AdjustmentScenario:
    name: str
    adjustment_kind: str
    tasks: Tuple[Tuple[Benchmark, Benchmark], ...]

    @property
    def old(self) -> Benchmark:
        return self.tasks[0][0]

    @property
    def new(self) -> Benchmark:
        return self.tasks[0][1]


def evaluate(benchmark: Benchmark, config: Mapping[str, Any]) -> float:
    problems = validate(config, benchmark.space)
    if problems:
        raise ValueError(f"{benchmark.name}: invalid configuration: {'; '.join(problems)}")
    return float(benchmark.oracle(config))


# -- (de)serialisation of search spaces --------------------------------------

_TYPES = {"categorical": Categorical, "int": UniformInt, "float": UniformFloat, "logfloat": LogUniformFloat}


def domain_to_json(name: str, domain: Domain) -> dict:
    if isinstance(domain, Categorical):
        return {"name": name, "type": "categorical", "choices": list(domain.choices)}
    return {"name": name, "type": domain.kind, "lo": domain.lo, "hi": domain.hi}


def space_to_json(space: SearchSpace) -> List[dict]:
    return [domain_to_json(n, d) for n, d in space.items()]


def space_from_json(items: Any, where: str = "space") -> SearchSpace:
    if not isinstance(items, list):
        raise BenchmarkFormatError(f"{where}: expected a list of hyperparameters")
    pairs = []
    for i, item in enumerate(items):
        at = f"{where}[{i}]"
        if not isinstance(item, dict):
            raise BenchmarkFormatError(f"{at}: expected an object")
        name = item.get("name")
        if not isinstance(name, str) or not name:
            raise BenchmarkFormatError(f"{at}.name: expected a non-empty string")
        kind = item.get("type")
        if kind not in _TYPES:
            raise BenchmarkFormatError(f"{at}.type: expected one of {sorted(_TYPES)}, got {kind!r}")
        try:
            if kind == "categorical":
                choices = item.get("choices")
                if not isinstance(choices, list):
                    raise BenchmarkFormatError(f"{at}.choices: expected a list")
                domain = Categorical(tuple(choices))
            else:
                for key in ("lo", "hi"):
                    if not isinstance(item.get(key), (int, float)) or isinstance(item.get(key), bool):
                        raise BenchmarkFormatError(f"{at}.{key}: expected a number")
                domain = _TYPES[kind](item["lo"], item["hi"])
        except (ValueError, TypeError) as exc:
            if isinstance(exc, BenchmarkFormatError):
                raise
            raise BenchmarkFormatError(f"{at}: {exc}") from None
        pairs.append((name, domain))
    try:
        return SearchSpace(pairs)
    except ValueError as exc:
        raise BenchmarkFormatError(f"{where}: {exc}") from None


def canonical_value(domain: Domain, value: Any) -> str:
    """Shortest round-trip text of a value, so 0.1 and 0.10 give the same key."""
    if isinstance(domain, Categorical):
        return json.dumps(value, sort_keys=True)
    if isinstance(domain, UniformInt):
        return str(int(value))
    return repr(float(value))


class TabularOracle:
    def __init__(self, name: str, space: SearchSpace, entries: Sequence[Tuple[Configuration, float]]):
        self.name = name
        self.space = space
        self._discrete = [i for i, d in enumerate(space.domains) if not isinstance(d, UniformFloat)]
        self._continuous = [i for i, d in enumerate(space.domains) if isinstance(d, UniformFloat)]
        self._table: Dict[Tuple[str, ...], float] = {}
        groups: Dict[Tuple[str, ...], List[Tuple[np.ndarray, float]]] = {}
        for config, objective in entries:
            full = self._key(config, range(space.dim))
            if full in self._table:
                raise ValueError(f"duplicate entry {config!r}")
            self._table[full] = objective
            if self._continuous:
                point = np.array([space.domains[i].encode(config[space.names[i]]) for i in self._continuous])
                groups.setdefault(self._key(config, self._discrete), []).append((point, objective))
        self._grid = {
            k: (np.array([p for p, _ in rows]), np.array([v for _, v in rows])) for k, rows in groups.items()
        }

    def _key(self, config: Mapping[str, Any], idx) -> Tuple[str, ...]:
        names, domains = self.space.names, self.space.domains
        return tuple(canonical_value(domains[i], config[names[i]]) for i in idx)

    def __call__(self, config: Mapping[str, Any]) -> float:
        exact = self._table.get(self._key(config, range(self.space.dim)))
        if exact is not None:
            return exact
        if not self._continuous:
            raise MissingEntryError(f"{self.name}: no table entry for {dict(config)!r}")
        group = self._grid.get(self._key(config, self._discrete))
        if group is None:
            raise MissingEntryError(f"{self.name}: no table entry matching the discrete part of {dict(config)!r}")
        points, values = group
        q = np.array([self.space.domains[i].encode(config[self.space.names[i]]) for i in self._continuous])
        return float(values[int(np.argmin(((points - q) ** 2).sum(axis=1)))])


def load_tabular(path: Union[str, os.PathLike]) -> Benchmark:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BenchmarkFormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise BenchmarkFormatError(f"{path}: top level must be an object")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise BenchmarkFormatError(f"{path}: name: expected a non-empty string")
    try:
        space = space_from_json(data.get("space"))
    except BenchmarkFormatError as exc:
        raise BenchmarkFormatError(f"{path}: {exc}") from None
    raw = data.get("entries")
    if not isinstance(raw, list) or not raw:
        raise BenchmarkFormatError(f"{path}: entries: expected a non-empty list")
    entries = []
    for i, entry in enumerate(raw):
        at = f"{path}: entries[{i}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("config"), dict):
            raise BenchmarkFormatError(f"{at}.config: expected an object")
        objective = entry.get("objective")
        if not isinstance(objective, (int, float)) or isinstance(objective, bool) or not math.isfinite(objective):
            raise BenchmarkFormatError(f"{at}.objective: expected a finite number")
        problems = validate(entry["config"], space)
        if problems:
            raise BenchmarkFormatError(f"{at}.config: {'; '.join(problems)}")
        entries.append((entry["config"], float(objective)))
    try:
        oracle = TabularOracle(name, space, entries)
    except ValueError as exc:
        raise BenchmarkFormatError(f"{path}: entries: {exc}") from None
    task = data.get("task", path.stem)
    return Benchmark(name=name, space=space, oracle=oracle, task_id=str(task))


def write_tabular(path: Union[str, os.PathLike], name: str, space: SearchSpace,
                  entries: Sequence[Tuple[Configuration, float]], task: Optional[str] = None) -> None:
    doc: Dict[str, Any] = {"name": name}
    if task is not None:
        doc["task"] = task
    doc["space"] = space_to_json(space)
    doc["entries"] = [{"config": dict(c), "objective": float(v)} for c, v in entries]
    Path(path).write_text(json.dumps(doc, indent=1))


# -- synthetic adjustment scenarios ------------------------------------------

# Reference ranges; every synthetic domain is a sub-range of these and the
# objective is defined on reference-unit coordinates, so old and new benchmarks
# agree on what a value means.
_REF: Dict[str, Domain] = {
    "lr": LogUniformFloat(1e-5, 1e-1),
    "dropout": UniformFloat(0.0, 0.8),
    "layers": UniformInt(1, 8),
    "act": Categorical(("relu", "tanh", "elu")),
    "wd": LogUniformFloat(1e-6, 1e-2),
}
_BASE = ("lr", "dropout", "layers", "act")
_MAX_SHIFT = 0.2


def _ref_unit(name: str, value: Any) -> float:
    d = _REF[name]
    if isinstance(d, UniformInt):
        return (value - d.lo) / (d.hi - d.lo)
    return d.encode(value)


def _from_ref_unit(name: str, t: float) -> Any:
    d = _REF[name]
    if isinstance(d, UniformInt):
        return int(round(d.lo + t * (d.hi - d.lo)))
    return d.decode(t)


def _ref_subrange(name: str, t_lo: float, t_hi: float) -> Domain:
    d = _REF[name]
    return type(d)(d.decode(t_lo), d.decode(t_hi))


class QuadraticObjective:
    """``offset + sum_d w_d (t_d(x_d) - t_d(x*_d))^2 + penalty[choice]``.

    ``t_d`` maps a value to reference-unit coordinates; the minimum ``offset`` is
    attained exactly at ``optimum``.
    """

    def __init__(self, weights: Mapping[str, float], optimum: Configuration, penalties: Mapping[str, Mapping[Any, float]],
                 offset: float):
        self.weights = dict(weights)
        self.optimum = dict(optimum)
        self.penalties = {k: dict(v) for k, v in penalties.items()}
        self.offset = float(offset)
        self._targets = {n: _ref_unit(n, self.optimum[n]) for n in self.weights}

    def __call__(self, config: Mapping[str, Any]) -> float:
        total = self.offset
        for name, w in self.weights.items():
            diff = _ref_unit(name, config[name]) - self._targets[name]
            total += w * diff * diff
        for name, table in self.penalties.items():
            total += table[config[name]]
        return total


def _shifted(name: str, value: Any, rng: np.random.Generator, domain: Domain) -> Any:
    """Move an optimum by at most ``_MAX_SHIFT`` of the range, staying inside ``domain``."""
    t = _ref_unit(name, value) + rng.uniform(-_MAX_SHIFT, _MAX_SHIFT)
    lo, hi = _ref_unit(name, domain.lo), _ref_unit(name, domain.hi)
    if isinstance(domain, UniformInt):
        d = _REF[name]
        step = 1.0 / (d.hi - d.lo)
        t = float(np.clip(t, lo, hi))
        out = _from_ref_unit(name, t)
        # rounding may exceed the allowed shift by half a step
        if abs(_ref_unit(name, out) - _ref_unit(name, value)) > _MAX_SHIFT + 1e-12:
            out = value + (1 if out > value else -1) * int(_MAX_SHIFT / step)
        return int(np.clip(out, domain.lo, domain.hi))
    return _from_ref_unit(name, float(np.clip(t, lo, hi)))


def _draw_weights(rng: np.random.Generator, names: Sequence[str]) -> Dict[str, float]:
    return {n: float(np.exp(rng.uniform(np.log(0.3), np.log(3.0)))) for n in names}


def _draw_optimum(rng: np.random.Generator, name: str, domain: Domain) -> Any:
    if isinstance(domain, UniformInt):
        return int(rng.integers(domain.lo, domain.hi + 1))
    lo, hi = _ref_unit(name, domain.lo), _ref_unit(name, domain.hi)
    span = hi - lo
    return _from_ref_unit(name, float(rng.uniform(lo + 0.15 * span, hi - 0.15 * span)))


def _synthetic_task(kind: str, task_seed: int, scenario: str) -> Tuple[Benchmark, Benchmark]:
    rng = np.random.default_rng([task_seed, ADJUSTMENT_KINDS.index(kind)])
    old_dom = {n: _REF[n] for n in _BASE}
    new_dom = dict(old_dom)
    if kind in ("range-add", "mixed"):
        old_dom["lr"] = _ref_subrange("lr", 0.0, 0.5)
    if kind == "range-remove":
        new_dom["lr"] = _ref_subrange("lr", 0.0, 0.5)
    if kind in ("hp-add", "mixed"):
        new_dom["wd"] = _REF["wd"]
    if kind in ("hp-remove", "mixed"):
        del new_dom["dropout"]

    numeric_old = [n for n in old_dom if n != "act"]
    w_old = _draw_weights(rng, numeric_old)
    opt_old = {n: _draw_optimum(rng, n, old_dom[n]) for n in numeric_old}
    best_act = rng.choice(3)
    choices = _REF["act"].choices
    pen = {c: (0.0 if i == best_act else float(rng.uniform(0.1, 0.6))) for i, c in enumerate(choices)}
    opt_old["act"] = choices[best_act]
    offset = float(rng.uniform(0.1, 1.0))

    if kind == "range-remove" and rng.random() < 0.5:
        # old optimum inside the range that the adjustment removes
        opt_old["lr"] = _from_ref_unit("lr", float(rng.uniform(0.55, 0.85)))

    w_new = {n: w for n, w in w_old.items() if n in new_dom}
    opt_new = {}
    for n in new_dom:
        if n == "act":
            opt_new[n] = opt_old[n]
        elif n in opt_old:
            opt_new[n] = _shifted(n, opt_old[n], rng, new_dom[n])
    if kind in ("range-add", "mixed") and rng.random() < 0.5:
        # new optimum in the added part of the range
        opt_new["lr"] = _from_ref_unit("lr", float(rng.uniform(0.55, 0.85)))
    if "wd" in new_dom:
        w_new["wd"] = _draw_weights(rng, ["wd"])["wd"]
        opt_new["wd"] = _draw_optimum(rng, "wd", new_dom["wd"])

    def order(d: Dict[str, Any], names) -> Dict[str, Any]:
        return {n: d[n] for n in names}

    old_space = SearchSpace([(n, old_dom[n]) for n in old_dom])
    new_space = SearchSpace([(n, new_dom[n]) for n in new_dom])
    f_old = QuadraticObjective(order(w_old, numeric_old), order(opt_old, old_space.names), {"act": pen}, offset)
    numeric_new = [n for n in new_dom if n != "act"]
    f_new = QuadraticObjective(order(w_new, numeric_new), order(opt_new, new_space.names), {"act": pen}, offset)
    task = str(task_seed)
    old = Benchmark(f"{scenario}-old", old_space, f_old, task, dict(f_old.optimum), offset)
    new = Benchmark(f"{scenario}-new", new_space, f_new, task, dict(f_new.optimum), offset)
    return old, new


def adjustment_kind_of(dec: SpaceDecomposition) -> str:
    """Classify a decomposition into one of ``ADJUSTMENT_KINDS``."""
    changes = set()
    if dec.only_new.dim:
        changes.add("hp-add")
    if dec.only_old.dim:
        changes.add("hp-remove")
    if any(not p.only_new_region.empty for p in dec.range_partitions):
        changes.add("range-add")
    if any(not p.only_old_region.empty for p in dec.range_partitions):
        changes.add("range-remove")
    if not changes:
        return "homogeneous"
    return changes.pop() if len(changes) == 1 else "mixed"


def synthetic_scenario(kind: str, task_seed: int, n_tasks: int = 1) -> AdjustmentScenario:
    """Synthetic old/new benchmark pairs for one adjustment kind.

    Task ``i`` is generated from seed ``task_seed + i``; the same arguments always
    reproduce the same scenario.
    """
    if kind not in ADJUSTMENT_KINDS:
        raise ValueError(f"unknown adjustment kind {kind!r}; choose from {', '.join(ADJUSTMENT_KINDS)}")
    name = f"synthetic-{kind}"
    tasks = tuple(_synthetic_task(kind, task_seed + i, name) for i in range(n_tasks))
    for old, new in tasks:
        found = adjustment_kind_of(decompose(old.space, new.space))
        if found != kind:
            raise AssertionError(f"{name} task {old.task_id}: decomposition looks like {found!r}")
        for b in (old, new):
            if validate(b.optimum, b.space):
                raise AssertionError(f"{b.name}: recorded optimum is not a valid configuration")
    return AdjustmentScenario(name=name, adjustment_kind=kind, tasks=tasks)
