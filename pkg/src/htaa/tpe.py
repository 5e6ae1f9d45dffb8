"""Tree-structured Parzen estimator: histories, the good/bad model and one optimisation step."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, List, Mapping, Sequence

import numpy as np

from htaa.kde import KdeEstimator, fit_encoded, logpdf_encoded, sample_encoded
from htaa.space import Configuration, SearchSpace, sample_prior, validate

GAMMA = 0.15
N_CANDIDATES = 64
RANDOM_FRACTION = 1.0 / 3.0
BANDWIDTH_FACTOR = 3.0


@dataclass(frozen=True)
class Trial:
    config: Configuration
    objective: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.objective):
            raise ValueError(f"objective must be finite, got {self.objective!r}")


class History:
    """Ordered trials over one search space, with a cached unit encoding."""

    def __init__(self, space: SearchSpace, trials: Iterable[Trial] = ()):
        self.space = space
        self._configs: List[Configuration] = []
        self._y: List[float] = []
        self._X = np.empty((16, space.dim))
        for t in trials:
            self.add(t.config, t.objective)

    @classmethod
    def _from_arrays(cls, space: SearchSpace, configs: List[Configuration], X: np.ndarray, y: Sequence[float]) -> "History":
        h = cls(space)
        h._configs = list(configs)
        h._y = [float(v) for v in y]
        h._X = np.array(X, dtype=float).reshape(len(h._y), space.dim)
        return h

    def add(self, config: Mapping[str, Any], objective: float, check: bool = True) -> None:
        objective = float(objective)
        if not math.isfinite(objective):
            raise ValueError(f"objective must be finite, got {objective!r}")
        if check:
            problems = validate(config, self.space)
            if problems:
                raise ValueError(f"configuration invalid for history space: {'; '.join(problems)}")
        n = len(self._y)
        if n == self._X.shape[0]:
            grown = np.empty((max(16, 2 * n), self.space.dim))
            grown[:n] = self._X[:n]
            self._X = grown
        self._X[n] = self.space.encode(config)
        self._configs.append(dict(config))
        self._y.append(objective)

    def __len__(self) -> int:
        return len(self._y)

    @property
    def X(self) -> np.ndarray:
        return self._X[: len(self._y)]

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self._y, dtype=float)

    @property
    def configs(self) -> List[Configuration]:
        return list(self._configs)

    @property
    def trials(self) -> List[Trial]:
        return [Trial(c, v) for c, v in zip(self._configs, self._y)]

    def restrict(self, subspace: SearchSpace) -> "History":
        """Same trials, viewed on a subspace whose domains match this history's."""
        cols = [self.space.index(n) for n in subspace.names]
        for n in subspace.names:
            if subspace[n] != self.space[n]:
                raise ValueError(f"domain of {n!r} differs; re-encode instead of restricting")
        configs = [{n: c[n] for n in subspace.names} for c in self._configs]
        return History._from_arrays(subspace, configs, self.X[:, cols], self._y)


@dataclass(frozen=True, eq=False)
class TpeModel:
    good: KdeEstimator
    bad: KdeEstimator
    gamma: float


def min_trials(dim: int) -> int:
    """Observations needed before a model replaces prior sampling."""
    return 2 * (dim + 1)


def n_good(n: int, dim: int, gamma: float = GAMMA) -> int:
    # rounding guards against 0.15 * 100 = 15.000000000000002
    return max(dim + 1, math.ceil(round(gamma * n, 9)))


def fit_tpe(history: History, gamma: float = GAMMA) -> TpeModel:
    d = history.space.dim
    n = len(history)
    if n < min_trials(d):
        raise ValueError(f"TPE needs {min_trials(d)} trials in {d} dimensions, got {n}")
    order = np.argsort(history.y, kind="stable")
    k = n_good(n, d, gamma)
    X = history.X
    return TpeModel(
        good=fit_encoded(X[order[:k]], history.space),
        bad=fit_encoded(X[order[k:]], history.space),
        gamma=gamma,
    )


def suggest_encoded(
    model: TpeModel,
    rng: np.random.Generator,
    n_candidates: int = N_CANDIDATES,
    bandwidth_factor: float = BANDWIDTH_FACTOR,
) -> np.ndarray:
    cand = sample_encoded(model.good, rng, n_candidates, bandwidth_factor)
    score = logpdf_encoded(model.good, cand) - logpdf_encoded(model.bad, cand)
    return cand[int(np.argmax(score))]


def suggest_tpe(
    model: TpeModel,
    rng: np.random.Generator,
    n_candidates: int = N_CANDIDATES,
    bandwidth_factor: float = BANDWIDTH_FACTOR,
) -> Configuration:
    """Best of ``n_candidates`` draws from the widened good density by g/l."""
    return model.good.space.decode(suggest_encoded(model, rng, n_candidates, bandwidth_factor))


def tpe_step(
    history: History,
    rng: np.random.Generator,
    *,
    random_fraction: float = RANDOM_FRACTION,
    gamma: float = GAMMA,
    n_candidates: int = N_CANDIDATES,
    bandwidth_factor: float = BANDWIDTH_FACTOR,
) -> Configuration:
    """One from-scratch TPE suggestion for ``history.space``."""
    space = history.space
    if space.dim == 0:
        return {}
    if rng.random() < random_fraction or len(history) < min_trials(space.dim):
        return sample_prior(space, rng)
    model = fit_tpe(history, gamma)
    return suggest_tpe(model, rng, n_candidates, bandwidth_factor)


def suggest_random(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    return sample_prior(space, rng)
