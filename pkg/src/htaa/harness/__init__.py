"""Evaluation protocol: runs, targets, speedups, failure rates and improvement."""

from htaa.harness.metrics import (
    aggregate_geomean,
    compute_target,
    evals_to_target,
    failure_fraction,
    glass_delta,
    speedup,
    std_floor,
)
from htaa.harness.report import SpeedupReport
from htaa.harness.runner import (
    ExperimentPlan,
    RunTrace,
    ScenarioSpec,
    derive_seed,
    load_plan,
    plan_from_dict,
    run_experiment,
    run_hpo,
)

__all__ = [
    "ExperimentPlan",
    "RunTrace",
    "ScenarioSpec",
    "SpeedupReport",
    "aggregate_geomean",
    "compute_target",
    "derive_seed",
    "evals_to_target",
    "failure_fraction",
    "glass_delta",
    "load_plan",
    "plan_from_dict",
    "run_experiment",
    "run_hpo",
    "speedup",
    "std_floor",
]
