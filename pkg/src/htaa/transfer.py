"""Hyperparameter transfer across adjustments: the four baselines and their combination.

Every strategy takes a :class:`TransferContext` (the old history plus its
decomposition against the new space), the history observed so far on the new
space, and a random generator, and returns one configuration for the new space.
"""

from __future__ import annotations

from functools import cached_property
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from htaa.fanova import ImportanceReport, importance
from htaa.space import Configuration, RangePartition, SearchSpace, decompose, in_region, project, sample_prior
from htaa.tpe import (
    BANDWIDTH_FACTOR,
    GAMMA,
    N_CANDIDATES,
    RANDOM_FRACTION,
    History,
    TpeModel,
    fit_tpe,
    min_trials,
    suggest_tpe,
    tpe_step,
)

STRATEGIES = ("tpe", "random", "only-optimize-new", "drop-unimportant", "best-first", "t2pe", "best-first+t2pe")
TRANSFER_STRATEGIES = frozenset(STRATEGIES) - {"tpe", "random"}

Suggester = Callable[[History, np.random.Generator], Configuration]


class TransferContext:
    """Old results and how the old space maps onto the new one.

    Derived quantities (projected history, best valid old configuration, the
    transfer model) are computed once and cached.
    """

    def __init__(self, old_history: History, new_space: SearchSpace, gamma: float = GAMMA):
        self.old_history = old_history
        self.new_space = new_space
        self.decomposition = decompose(old_history.space, new_space)
        self.gamma = gamma

    @property
    def both(self) -> SearchSpace:
        return self.decomposition.both

    @cached_property
    def projected(self) -> History:
        removed = self.decomposition.removed_regions
        keep = History(self.both)
        for trial in self.old_history.trials:
            if removed and in_region(trial.config, removed):
                continue
            keep.add(project(trial.config, self.both), trial.objective)
        return keep

    @cached_property
    def best_old(self) -> Optional[Configuration]:
        h = self.projected
        if len(h) == 0:
            return None
        return dict(h.configs[int(np.argmin(h.y))])

    @cached_property
    def both_model(self) -> Optional[TpeModel]:
        h = self.projected
        if self.both.dim == 0 or len(h) < min_trials(self.both.dim):
            return None
        return fit_tpe(h, self.gamma)


def project_old_history(ctx: TransferContext) -> History:
    """Old trials outside removed ranges, projected onto the shared space."""
    return ctx.projected


def best_valid_old(ctx: TransferContext) -> Configuration:
    best = ctx.best_old
    if best is None:
        raise LookupError("no old configuration survives the adjustment")
    return dict(best)


def _assemble(space: SearchSpace, *parts: Configuration) -> Configuration:
    merged: Dict = {}
    for part in parts:
        merged.update(part)
    return {n: merged[n] for n in space.names}


def _frozen_part(ctx: TransferContext, rng: np.random.Generator) -> Configuration:
    # nothing valid survived: fall back to the prior of the shared space
    best = ctx.best_old
    return dict(best) if best is not None else sample_prior(ctx.both, rng)


def suggest_only_optimize_new(ctx: TransferContext, new_history: History, rng: np.random.Generator,
                              **tpe_kwargs) -> Configuration:
    fixed = _frozen_part(ctx, rng)
    only_new = ctx.decomposition.only_new
    free = tpe_step(new_history.restrict(only_new), rng, **tpe_kwargs) if only_new.dim else {}
    return _assemble(ctx.new_space, fixed, free)


def frozen_names(ctx: TransferContext, report: ImportanceReport) -> Tuple[str, ...]:
    """Shared hyperparameters whose importance is strictly below the mean."""
    # the slack keeps exactly equal importances from tripping over rounding in the mean
    cut = report.mean_importance - 1e-12 * max(1.0, abs(report.mean_importance))
    return tuple(n for n in ctx.both.names if report.individual.get(n, 0.0) < cut)


def suggest_drop_unimportant(ctx: TransferContext, new_history: History, report: ImportanceReport,
                             rng: np.random.Generator, **tpe_kwargs) -> Configuration:
    frozen = frozen_names(ctx, report)
    tuned = ctx.new_space.subspace(n for n in ctx.new_space.names if n not in frozen)
    free = tpe_step(new_history.restrict(tuned), rng, **tpe_kwargs) if tuned.dim else {}
    fixed = project(_frozen_part(ctx, rng), frozen) if frozen else {}
    return _assemble(ctx.new_space, fixed, free)


def suggest_best_first(ctx: TransferContext, new_history: History, rng: np.random.Generator,
                       **tpe_kwargs) -> Configuration:
    if len(new_history) == 0:
        return suggest_only_optimize_new(ctx, new_history, rng, **tpe_kwargs)
    return tpe_step(new_history, rng, **tpe_kwargs)


def mutate_added_ranges(config: Configuration, partitions: Sequence[RangePartition],
                        rng: np.random.Generator) -> Tuple[str, ...]:
    """Resample extended hyperparameters from their added range, in place.

    Each partition fires with probability equal to its added share of the new
    prior mass. Returns the names that were replaced.
    """
    mutated = []
    for part in partitions:
        if rng.random() < part.only_new_fraction:
            config[part.name] = part.only_new_region.sample(rng)
            mutated.append(part.name)
    return tuple(mutated)


def t2pe_branch(
    ctx: TransferContext,
    new_history: History,
    rng: np.random.Generator,
    *,
    random_fraction: float = RANDOM_FRACTION,
    gamma: float = GAMMA,
    n_candidates: int = N_CANDIDATES,
    bandwidth_factor: float = BANDWIDTH_FACTOR,
) -> Tuple[Configuration, str]:
    """Transfer TPE suggestion together with the branch that produced it.

    The tag is ``"random"`` for the random fraction, ``"transfer"`` while the new
    history is too short for its own model, and ``"model"`` afterwards.
    """
    space = ctx.new_space
    if rng.random() < random_fraction:
        return sample_prior(space, rng), "random"
    if len(new_history) >= min_trials(space.dim):
        model = fit_tpe(new_history, gamma)
        return suggest_tpe(model, rng, n_candidates, bandwidth_factor), "model"

    model = ctx.both_model
    if model is not None:
        both = suggest_tpe(model, rng, n_candidates, bandwidth_factor)
    else:
        both = sample_prior(ctx.both, rng)
    mutate_added_ranges(both, ctx.decomposition.added_partitions, rng)
    only_new = sample_prior(ctx.decomposition.only_new, rng)
    return _assemble(space, both, only_new), "transfer"


def suggest_t2pe(ctx: TransferContext, new_history: History, rng: np.random.Generator,
                 **tpe_kwargs) -> Configuration:
    return t2pe_branch(ctx, new_history, rng, **tpe_kwargs)[0]


def suggest_best_first_t2pe(ctx: TransferContext, new_history: History, rng: np.random.Generator,
                            **tpe_kwargs) -> Configuration:
    if len(new_history) == 0:
        return suggest_only_optimize_new(ctx, new_history, rng, **tpe_kwargs)
    return suggest_t2pe(ctx, new_history, rng, **tpe_kwargs)


def make_strategy(
    name: str,
    space: SearchSpace,
    ctx: Optional[TransferContext] = None,
    *,
    setup_rng: Optional[np.random.Generator] = None,
    importance_report: Optional[ImportanceReport] = None,
) -> Suggester:
    """Bind a strategy name to a ``suggest(history, rng)`` callable.

    ``drop-unimportant`` computes its importance report from the old history with
    ``setup_rng`` unless one is passed in.
    """
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    if name in TRANSFER_STRATEGIES:
        if ctx is None:
            raise ValueError(f"strategy {name!r} needs a transfer context")
        if ctx.new_space != space:
            raise ValueError("transfer context was built for a different search space")
    elif ctx is not None:
        raise ValueError(f"strategy {name!r} does not take a transfer context")

    if name == "tpe":
        return lambda history, rng: tpe_step(history, rng)
    if name == "random":
        return lambda history, rng: sample_prior(space, rng)
    if name == "only-optimize-new":
        return lambda history, rng: suggest_only_optimize_new(ctx, history, rng)
    if name == "best-first":
        return lambda history, rng: suggest_best_first(ctx, history, rng)
    if name == "t2pe":
        return lambda history, rng: suggest_t2pe(ctx, history, rng)
    if name == "best-first+t2pe":
        return lambda history, rng: suggest_best_first_t2pe(ctx, history, rng)

    report = importance_report
    if report is None:
        report = old_importance(ctx, setup_rng if setup_rng is not None else np.random.default_rng())
    return lambda history, rng: suggest_drop_unimportant(ctx, history, report, rng)


def old_importance(ctx: TransferContext, rng: np.random.Generator) -> ImportanceReport:
    """fANOVA importance on the old history; uniform when it is too short to fit."""
    h = ctx.old_history
    if len(h) < 2:
        return ImportanceReport({n: 1.0 / max(h.space.dim, 1) for n in h.space.names})
    return importance(h, h.space, rng=rng)
