"""Speedup, failure and improvement metrics over best-so-far traces."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

STD_FLOOR_QUANTILE = 0.2
STD_FLOOR_FALLBACK = 1e-6
CLIP_LOW = -100.0


def compute_target(traces: Sequence[Sequence[float]], reference_budget: int) -> float:
    """Mean over seeds of the best-so-far value after ``reference_budget`` evaluations."""
    if reference_budget < 1:
        raise ValueError("reference budget must be positive")
    if not traces:
        raise ValueError("no traces to average")
    vals = []
    for i, tr in enumerate(traces):
        if len(tr) < reference_budget:
            raise ValueError(f"trace {i} has {len(tr)} evaluations, need {reference_budget}")
        vals.append(tr[reference_budget - 1])
    return float(np.mean(vals))


def evals_to_target(trace: Sequence[float], target: float) -> Optional[int]:
    """1-based index of the first evaluation reaching ``target``; None on failure."""
    for k, v in enumerate(trace, start=1):
        if v <= target:
            return k
    return None


def speedup(control_counts: Iterable[Optional[int]], treatment_counts: Iterable[Optional[int]]) -> Optional[float]:
    """Ratio of mean counts over successful runs; None when a side never succeeds."""
    control = [c for c in control_counts if c is not None]
    treatment = [c for c in treatment_counts if c is not None]
    if not control or not treatment:
        return None
    return float(np.mean(control) / np.mean(treatment))


def failure_fraction(counts: Sequence[Optional[int]]) -> float:
    if not counts:
        raise ValueError("no runs")
    return sum(c is None for c in counts) / len(counts)


def aggregate_geomean(values: Iterable[float]) -> float:
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("geometric mean of nothing")
    if np.any(~(vals > 0)):
        raise ValueError("geometric mean needs positive values")
    return float(np.exp(np.mean(np.log(vals))))


def glass_delta(treatment: Sequence[float], control: Sequence[float], floor: float) -> float:
    """Improvement of treatment over control in control standard deviations, clipped below."""
    c = np.asarray(control, dtype=float)
    t = np.asarray(treatment, dtype=float)
    sd = float(c.std(ddof=1)) if c.size > 1 else 0.0
    raw = (c.mean() - t.mean()) / max(sd, floor)
    return float(max(raw, CLIP_LOW))


def std_floor(stds: Iterable[float]) -> float:
    pos = np.array([s for s in stds if s > 0 and math.isfinite(s)], dtype=float)
    if pos.size == 0:
        return STD_FLOOR_FALLBACK
    return float(np.quantile(pos, STD_FLOOR_QUANTILE))
