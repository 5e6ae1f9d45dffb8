"""Functional ANOVA importance from a bootstrap forest of regression trees.

Trees are grown on the unit encoding of a history. Every leaf is a box (numeric
columns) times a choice subset (categorical columns), so prior-weighted
marginals can be computed exactly from leaf measures instead of by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from htaa.space import KIND_CAT, KIND_INT, SearchSpace
from htaa.tpe import History

N_TREES = 16
MAX_DEPTH = 6


@dataclass
class _Node:
    value: float
    feature: int = -1
    threshold: float = 0.0  # numeric: u < threshold goes left
    category: float = -1.0  # categorical: == category goes left
    left: Optional["_Node"] = None
    right: Optional["_Node"] = None


class RegressionTree:
    """Axis-aligned regression tree whose leaves know their prior measure."""

    def __init__(self, space: SearchSpace, root: _Node, leaves: list):
        self.space = space
        self.root = root
        d = space.dim
        self.values = np.array([leaf[0] for leaf in leaves], dtype=float)
        self.lower = np.array([leaf[1] for leaf in leaves], dtype=float).reshape(len(leaves), d)
        self.upper = np.array([leaf[2] for leaf in leaves], dtype=float).reshape(len(leaves), d)
        self.cat_masks: Dict[int, np.ndarray] = {
            k: np.array([leaf[3][k] for leaf in leaves], dtype=bool)
            for k in np.flatnonzero(space.kinds == KIND_CAT)
        }
        measures = self.upper - self.lower
        for k, mask in self.cat_masks.items():
            measures[:, k] = mask.sum(axis=1) / space.levels[k]
        self.measures = measures
        self.leaf_mass = measures.prod(axis=1)

    @property
    def n_leaves(self) -> int:
        return self.values.size

    @property
    def root_feature(self) -> int:
        return self.root.feature

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.empty(X.shape[0])
        for r, row in enumerate(X):
            node = self.root
            while node.left is not None:
                if self.space.kinds[node.feature] == KIND_CAT:
                    go_left = row[node.feature] == node.category
                else:
                    go_left = row[node.feature] < node.threshold
                node = node.left if go_left else node.right
            out[r] = node.value
        return out

    def mean(self) -> float:
        return float(self.values @ self.leaf_mass)

    def total_variance(self) -> float:
        mu = self.mean()
        return float(((self.values - mu) ** 2) @ self.leaf_mass)

    def unary_marginal(self, feature: int) -> Tuple[np.ndarray, np.ndarray]:
        """Piecewise-constant marginal of one column as (piece weights, values)."""
        others = np.delete(self.measures, feature, axis=1).prod(axis=1)
        contrib = self.values * others
        if self.space.kinds[feature] == KIND_CAT:
            member = self.cat_masks[feature].T  # (K, leaves)
            K = self.space.levels[feature]
            weights = np.full(K, 1.0 / K)
        else:
            edges = np.unique(np.concatenate([self.lower[:, feature], self.upper[:, feature]]))
            mids = 0.5 * (edges[:-1] + edges[1:])
            member = (self.lower[:, feature][None, :] <= mids[:, None]) & (mids[:, None] < self.upper[:, feature][None, :])
            weights = np.diff(edges)
        return weights, member.astype(float) @ contrib


def tree_marginal_variance(tree: RegressionTree, name: str) -> float:
    if name not in tree.space:
        raise KeyError(f"unknown hyperparameter {name!r}")
    weights, marginal = tree.unary_marginal(tree.space.index(name))
    mu = float(weights @ marginal)
    return max(float(weights @ (marginal - mu) ** 2), 0.0)


def _best_split(X: np.ndarray, y: np.ndarray, kinds: np.ndarray, levels: np.ndarray):
    """Lowest summed SSE split; ties go to the earlier column / lower threshold."""
    n = y.size
    best = None
    for k in range(X.shape[1]):
        v = X[:, k]
        if kinds[k] == KIND_CAT:
            cats = np.unique(v)
            if cats.size < 2:
                continue
            tot, tot2 = y.sum(), (y * y).sum()
            for c in cats:
                left = v == c
                nl = int(left.sum())
                sl, sl2 = y[left].sum(), (y[left] ** 2).sum()
                nr = n - nl
                sse = (sl2 - sl * sl / nl) + ((tot2 - sl2) - (tot - sl) ** 2 / nr)
                if best is None or sse < best[0]:
                    best = (sse, k, float(c), left)
            continue
        order = np.argsort(v, kind="stable")
        vs, ys = v[order], y[order]
        cut = np.flatnonzero(vs[1:] > vs[:-1])  # split after position i
        if cut.size == 0:
            continue
        cs, cs2 = np.cumsum(ys), np.cumsum(ys * ys)
        nl = cut + 1.0
        nr = n - nl
        sl, sl2 = cs[cut], cs2[cut]
        sse = (sl2 - sl * sl / nl) + ((cs2[-1] - sl2) - (cs[-1] - sl) ** 2 / nr)
        j = int(np.argmin(sse))
        if best is None or sse[j] < best[0]:
            a, b = vs[cut[j]], vs[cut[j] + 1]
            if kinds[k] == KIND_INT:
                L = levels[k]
                ia, ib = int(a * L), int(b * L)
                threshold = ((ia + ib) // 2 + 1) / L
            else:
                threshold = 0.5 * (a + b)
            best = (float(sse[j]), k, threshold, v < threshold)
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, space: SearchSpace, max_depth: int = MAX_DEPTH) -> RegressionTree:
    kinds, levels = space.kinds, space.levels
    d = space.dim
    leaves = []

    def grow(idx: np.ndarray, depth: int, lo: np.ndarray, hi: np.ndarray, masks: dict) -> _Node:
        ys = y[idx]
        node = _Node(value=float(ys.mean()))
        sse = float(((ys - node.value) ** 2).sum())
        split = None
        if depth < max_depth and idx.size >= 2 and sse > 1e-12 * max(1.0, float(ys @ ys)):
            split = _best_split(X[idx], ys, kinds, levels)
        if split is None or not split[0] < sse:
            leaves.append((node.value, lo, hi, masks))
            return node
        _, k, where, go_left = split
        node.feature = k
        if kinds[k] == KIND_CAT:
            node.category = where
            lm = dict(masks)
            rm = dict(masks)
            lm[k] = np.zeros_like(masks[k])
            lm[k][int(where)] = True
            rm[k] = masks[k].copy()
            rm[k][int(where)] = False
            node.left = grow(idx[go_left], depth + 1, lo, hi, lm)
            node.right = grow(idx[~go_left], depth + 1, lo, hi, rm)
        else:
            node.threshold = where
            lhi, rlo = hi.copy(), lo.copy()
            lhi[k] = where
            rlo[k] = where
            node.left = grow(idx[go_left], depth + 1, lo, lhi, masks)
            node.right = grow(idx[~go_left], depth + 1, rlo, hi, masks)
        return node

    masks = {k: np.ones(levels[k], dtype=bool) for k in np.flatnonzero(kinds == KIND_CAT)}
    root = grow(np.arange(y.size), 0, np.zeros(d), np.ones(d), masks)
    return RegressionTree(space, root, leaves)


def fit_forest(history: History, n_trees: int = N_TREES, rng: Optional[np.random.Generator] = None,
               max_depth: int = MAX_DEPTH) -> List[RegressionTree]:
    """Trees on bootstrap resamples of ``history``."""
    if len(history) < 2:
        raise ValueError("fANOVA needs at least two trials")
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    rng = np.random.default_rng() if rng is None else rng
    X, y = history.X, history.y
    n = y.size
    return [fit_tree(X[b], y[b], history.space, max_depth) for b in (rng.integers(0, n, n) for _ in range(n_trees))]


@dataclass(frozen=True)
class ImportanceReport:
    individual: Dict[str, float]
    mean_importance: float = field(init=False)

    def __post_init__(self) -> None:
        vals = list(self.individual.values())
        object.__setattr__(self, "mean_importance", float(np.mean(vals)) if vals else 0.0)

    def to_dict(self) -> dict:
        return {"individual": dict(self.individual), "mean_importance": self.mean_importance}


def tree_importances(tree: RegressionTree) -> np.ndarray:
    total = tree.total_variance()
    names = tree.space.names
    if total <= 1e-14 * max(1.0, tree.mean() ** 2):
        return np.zeros(len(names))
    return np.array([min(tree_marginal_variance(tree, n) / total, 1.0) for n in names])


def importance(history: History, space: Optional[SearchSpace] = None, n_trees: int = N_TREES,
               rng: Optional[np.random.Generator] = None) -> ImportanceReport:
    """Per-hyperparameter share of prior variance, averaged over the forest."""
    if space is not None and space != history.space:
        raise ValueError("history was recorded on a different search space")
    trees = fit_forest(history, n_trees, rng)
    shares = np.mean([tree_importances(t) for t in trees], axis=0)
    return ImportanceReport({n: float(s) for n, s in zip(history.space.names, shares)})
