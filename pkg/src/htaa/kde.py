"""Kernel density estimators over mixed search spaces.

An estimator is an equally weighted mixture of product kernels, one kernel per
observed configuration. Numeric columns use a Gaussian truncated to the unit
interval (integers take the mass of their cell), categorical columns keep
``1 - w`` on the observed choice and spread ``w`` over the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from htaa._kernels import log_ndtr_diff, mixture_logpdf
from htaa.space import KIND_CAT, KIND_CONT, KIND_INT, SearchSpace, validate

MIN_BANDWIDTH = 1e-3


@dataclass(frozen=True, eq=False)
class KdeEstimator:
    space: SearchSpace
    points: np.ndarray  # (n, d) unit encoded
    bandwidths: np.ndarray  # (d,)
    log_norm: np.ndarray  # (n, d)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _bandwidths(X: np.ndarray, space: SearchSpace) -> np.ndarray:
    n, d = X.shape
    numeric = space.kinds != KIND_CAT
    bw = np.empty(d)
    if n > 1:
        std = X[:, numeric].std(axis=0, ddof=1)
    else:
        std = np.zeros(int(numeric.sum()))
    # normal-reference rule, floored
    bw[numeric] = np.maximum(1.06 * std * n ** (-1.0 / (4 + d)), MIN_BANDWIDTH)
    k = space.levels[~numeric].astype(float)
    bw[~numeric] = (k - 1.0) / (k - 1.0 + n)
    return bw


def _log_truncation(P: np.ndarray, bw: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    lz = np.zeros(P.shape)
    numeric = kinds != KIND_CAT
    if numeric.any():
        h = bw[numeric]
        p = P[:, numeric]
        lz[:, numeric] = log_ndtr_diff(-p / h, (1.0 - p) / h)
    return lz


def fit_encoded(X: np.ndarray, space: SearchSpace) -> KdeEstimator:
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("a density estimate needs at least one point")
    if X.shape[1] != space.dim:
        raise ValueError(f"points have {X.shape[1]} columns, space has {space.dim}")
    bw = _bandwidths(X, space)
    return KdeEstimator(space, X, bw, _log_truncation(X, bw, space.kinds))


def fit_kde(points: Union[Sequence[Mapping[str, Any]], np.ndarray], space: SearchSpace) -> KdeEstimator:
    if isinstance(points, np.ndarray):
        return fit_encoded(points, space)
    if len(points) == 0:
        raise ValueError("a density estimate needs at least one point")
    return fit_encoded(np.array([space.encode(p) for p in points]).reshape(len(points), space.dim), space)


def logpdf_encoded(est: KdeEstimator, U: np.ndarray) -> np.ndarray:
    """Log density in unit-encoding coordinates for each row of ``U``."""
    U = np.ascontiguousarray(U, dtype=float)
    if est.space.dim == 0:
        return np.zeros(U.shape[0])
    return mixture_logpdf(U, est.points, est.bandwidths, est.log_norm, est.space.kinds, est.space.levels)


def kde_logpdf(est: KdeEstimator, config: Mapping[str, Any]) -> float:
    problems = validate(config, est.space)
    if problems:
        raise ValueError(f"invalid configuration: {'; '.join(problems)}")
    u = est.space.encode(config)[None, :]
    return float(logpdf_encoded(est, u)[0]) + est.space.log_jacobian(config)


def kde_pdf(est: KdeEstimator, config: Mapping[str, Any]) -> float:
    """Density w.r.t. Lebesgue measure on float values and counting measure otherwise."""
    return math.exp(kde_logpdf(est, config))


def sample_encoded(est: KdeEstimator, rng: np.random.Generator, n: int, bandwidth_factor: float = 1.0) -> np.ndarray:
    space = est.space
    centers = est.points[rng.integers(0, est.n_points, size=n)]
    out = centers.copy()
    numeric = np.flatnonzero(space.kinds != KIND_CAT)
    if numeric.size:
        c = centers[:, numeric]
        sigma = est.bandwidths[numeric] * bandwidth_factor
        lo = ndtr(-c / sigma)
        hi = ndtr((1.0 - c) / sigma)
        q = lo + rng.random(c.shape) * (hi - lo)
        x = np.clip(c + sigma * ndtri(q), 0.0, 1.0)
        is_int = space.kinds[numeric] == KIND_INT
        if is_int.any():
            L = space.levels[numeric][is_int]
            cell = np.minimum(np.floor(x[:, is_int] * L), L - 1)
            x[:, is_int] = (cell + 0.5) / L
        out[:, numeric] = x
    cats = np.flatnonzero(space.kinds == KIND_CAT)
    if cats.size:
        K = space.levels[cats]
        w = est.bandwidths[cats]
        move = rng.random((n, cats.size)) < w
        other = np.floor(rng.random((n, cats.size)) * (K - 1))
        c = centers[:, cats]
        other = np.where(other >= c, other + 1, other)
        out[:, cats] = np.where(move, other, c)
    return out


def kde_sample(est: KdeEstimator, rng: np.random.Generator, bandwidth_factor: float = 1.0) -> dict:
    return est.space.decode(sample_encoded(est, rng, 1, bandwidth_factor)[0])


__all__ = [
    "KIND_CONT",
    "KdeEstimator",
    "MIN_BANDWIDTH",
    "fit_encoded",
    "fit_kde",
    "kde_logpdf",
    "kde_pdf",
    "kde_sample",
    "logpdf_encoded",
    "sample_encoded",
]
