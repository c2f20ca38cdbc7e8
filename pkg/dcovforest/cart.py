"""Breiman-style random forest whose per-node feature subsets are drawn with distance-covariance weights.

Each tree is grown on its own bootstrap sample. At every node, `mtry` distinct candidate features are drawn by
sequential weighted draws without replacement, and the node is split at the (feature, threshold) pair minimizing the
children's total sum of squared errors. A row goes left when `x[feature] <= threshold`.
"""
from __future__ import annotations

__all__ = [
    "SplitCandidate",
    "CartTree",
    "CartForest",
    "weighted_subset",
    "best_split",
    "grow_cart_tree",
    "build_cart_forest",
    "predict_cart",
]

import dataclasses
import logging
import typing as tp

import numpy as np
from joblib import Parallel, delayed

from dcovforest.dataset import Dataset, as_feature_matrix
from dcovforest.dcov import FeatureWeights
from dcovforest.exceptions import ConfigError, DimensionMismatchError
from dcovforest.rng import stream

_LOGGER = logging.getLogger("dcovforest")

LEAF = -1


@dataclasses.dataclass(slots=True, frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    sse: float  # left SSE + right SSE


@dataclasses.dataclass(slots=True, frozen=True)
class CartTree:
    """Flattened binary tree. Node 0 is the root; leaves have `features == -1` and `-1` children."""

    features: np.ndarray
    thresholds: np.ndarray
    children_left: np.ndarray
    children_right: np.ndarray
    values: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):  # children always come after their parent
            if self.features[node] != LEAF:
                depths[self.children_left[node]] = depths[node] + 1
                depths[self.children_right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf node reached by each row of `x`."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.features[node] != LEAF)
        while active.size:
            current = node[active]
            go_left = x[active, self.features[current]] <= self.thresholds[current]
            node[active] = np.where(go_left, self.children_left[current], self.children_right[current])
            active = active[self.features[node[active]] != LEAF]
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = as_feature_matrix(x)
        return self.values[self.apply(x)]


@dataclasses.dataclass(slots=True, frozen=True)
class CartForest:
    trees: tuple[CartTree, ...]
    mtry: int
    weights: FeatureWeights
    n_boot: int
    max_depth: int | None  # None: grow until no valid split remains
    seed: int
    bootstrap: bool = True

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def d(self) -> int:
        return self.weights.d

    def predict(self, x) -> np.ndarray:
        x = as_feature_matrix(x, self.d)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict(x)
        return total / self.n_trees


def weighted_subset(
    d: int,
    m: int,
    weights: FeatureWeights | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw `m` distinct feature indices (returned sorted).

    Draws are sequential, each one proportional to the weights of the features not yet drawn. Zero-weight features are
    only drawn (uniformly) once every positive-weight feature has been taken. Uniform or missing weights take the plain
    `rng.choice(d, m, replace=False)` path, so an unweighted forest and a uniformly weighted one are identical.
    """
    if not 1 <= m <= d:
        raise ConfigError(f"Feature subset size must be between 1 and {d}, not: {m}")
    if weights is not None and weights.d != d:
        raise DimensionMismatchError(f"Got {weights.d} feature weights for {d} features.")
    if weights is None or weights.is_uniform:
        return np.sort(rng.choice(d, size=m, replace=False))

    remaining = weights.p.copy()
    taken = np.zeros(d, dtype=bool)
    for _ in range(m):
        total = remaining.sum()
        if total > 0:
            j = rng.choice(d, p=remaining / total)
        else:
            j = rng.choice(np.flatnonzero(~taken))
        taken[j] = True
        remaining[j] = 0.0
    return np.flatnonzero(taken)


def best_split(x: np.ndarray, y: np.ndarray, candidates: tp.Iterable[int]) -> SplitCandidate | None:
    """Exhaustive SSE-minimizing split over `candidates`, or `None` if the node is pure or every candidate feature is
    constant. Thresholds are midpoints between consecutive distinct sorted values; ties go to the lowest feature index,
    then the smallest threshold."""
    n = y.shape[0]
    if n < 2 or np.all(y == y[0]):
        return None

    centered = y - y.mean()
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    best = None  # type: SplitCandidate | None
    for j in sorted(int(c) for c in candidates):
        column = x[:, j]
        order = np.argsort(column, kind="stable")
        xs = column[order]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        ys = centered[order]
        left_sum = np.cumsum(ys)[:-1]
        left_sq = np.cumsum(ys * ys)[:-1]
        right_sum = ys.sum() - left_sum
        right_sq = (ys * ys).sum() - left_sq
        sse = (left_sq - left_sum ** 2 / n_left) + (right_sq - right_sum ** 2 / n_right)
        sse = np.where(valid, np.maximum(sse, 0.0), np.inf)
        i = int(np.argmin(sse))
        if best is None or sse[i] < best.sse:
            threshold = 0.5 * (xs[i] + xs[i + 1])
            if threshold >= xs[i + 1]:
                # Adjacent floats have no value strictly between them; `x <= xs[i]` still separates the halves.
                threshold = xs[i]
            best = SplitCandidate(j, float(threshold), float(sse[i]))
    return best


def grow_cart_tree(
    x: np.ndarray,
    y: np.ndarray,
    weights: FeatureWeights | None,
    mtry: int,
    max_depth: int | None,
    rng: np.random.Generator,
) -> CartTree:
    """Grow one tree depth-first (left child first) until `max_depth`, a single-sample node, or no valid split."""
    d = x.shape[1]
    features, thresholds, lefts, rights, values, counts = [], [], [], [], [], []

    def new_node(indices: np.ndarray) -> int:
        features.append(LEAF)
        thresholds.append(0.0)
        lefts.append(LEAF)
        rights.append(LEAF)
        values.append(float(y[indices].mean()))
        counts.append(indices.shape[0])
        return len(features) - 1

    stack = [(new_node(np.arange(y.shape[0])), np.arange(y.shape[0]), 0)]
    while stack:
        node, indices, depth = stack.pop()
        if indices.shape[0] < 2 or (max_depth is not None and depth >= max_depth):
            continue
        subset = weighted_subset(d, mtry, weights, rng)
        split = best_split(x[indices], y[indices], subset)
        if split is None:
            continue
        go_left = x[indices, split.feature] <= split.threshold
        left = new_node(indices[go_left])
        right = new_node(indices[~go_left])
        features[node] = split.feature
        thresholds[node] = split.threshold
        lefts[node] = left
        rights[node] = right
        stack.append((right, indices[~go_left], depth + 1))
        stack.append((left, indices[go_left], depth + 1))

    return CartTree(
        np.array(features, dtype=np.int64),
        np.array(thresholds, dtype=np.float64),
        np.array(lefts, dtype=np.int64),
        np.array(rights, dtype=np.int64),
        np.array(values, dtype=np.float64),
        np.array(counts, dtype=np.int64),
    )


def _build_one(
    data: Dataset,
    weights: FeatureWeights | None,
    mtry: int,
    n_boot: int,
    max_depth: int | None,
    bootstrap: bool,
    rng: np.random.Generator,
) -> CartTree:
    if bootstrap:
        rows = rng.integers(data.n, size=n_boot)
    else:
        rows = np.arange(data.n)
    return grow_cart_tree(data.features[rows], data.response[rows], weights, mtry, max_depth, rng)


def build_cart_forest(
    data: Dataset,
    weights: FeatureWeights | None,
    n_trees: int,
    mtry: int,
    n_boot: int,
    max_depth: int | None,
    seed: int,
    n_jobs: int = 1,
    bootstrap: bool = True,
) -> CartForest:
    """Grow `n_trees` CART trees, tree `t` on a bootstrap sample of size `n_boot` drawn from stream `(seed, t)`.

    `weights=None` means uniform subset sampling. `bootstrap=False` grows every tree on the full data in its original
    order (ignoring `n_boot`).
    """
    data.require_nonempty()
    if n_trees < 1:
        raise ConfigError(f"Forest needs at least one tree, not: {n_trees}")
    if n_boot < 1:
        raise ConfigError(f"Bootstrap sample size must be positive, not: {n_boot}")
    if max_depth is not None and max_depth < 0:
        raise ConfigError(f"Maximum depth must be non-negative, not: {max_depth}")
    if weights is None:
        weights = FeatureWeights.uniform(data.d)
    elif weights.d != data.d:
        raise DimensionMismatchError(f"Got {weights.d} feature weights for {data.d} features.")
    if not bootstrap:
        n_boot = data.n

    if n_jobs == 1:
        trees = [
            _build_one(data, weights, mtry, n_boot, max_depth, bootstrap, stream(seed, t)) for t in range(n_trees)
        ]
    else:
        trees = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_build_one)(data, weights, mtry, n_boot, max_depth, bootstrap, stream(seed, t))
            for t in range(n_trees)
        )
    _LOGGER.debug(
        f"Built CART forest: {n_trees} trees, mtry {mtry}, n_boot {n_boot}, max depth {max_depth}, "
        f"mean nodes {np.mean([tree.n_nodes for tree in trees]):.1f}"
    )
    return CartForest(tuple(trees), mtry, weights, n_boot, max_depth, seed, bootstrap)


def predict_cart(forest: CartForest, x) -> float:
    """Forest prediction at the single point `x`."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(forest.predict(point)[0])
