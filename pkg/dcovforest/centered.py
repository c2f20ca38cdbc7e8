"""Centered random forests: fixed-depth trees that choose each split feature at random with probabilities `p` and split
the node's cell at its midpoint.

Trees are complete binary trees stored in heap order: internal node `k` has children `2k + 1` (left, `x < midpoint`)
and `2k + 2` (right, `x >= midpoint`), and leaf `i` is node `2^depth - 1 + i`. Every leaf is split exactly `depth`
times, whether or not it still holds training points; an empty leaf predicts 0.
"""
from __future__ import annotations

__all__ = [
    "MAX_DEPTH",
    "Cell",
    "CenteredTree",
    "CenteredForest",
    "DepthSelection",
    "build_centered_tree",
    "predict_tree",
    "build_forest",
    "candidate_depths",
    "cv_select_depth",
    "cv_depth_selection",
]

import dataclasses
import logging
import math
import typing as tp

import numpy as np
from joblib import Parallel, delayed

from dcovforest.dataset import Dataset, as_feature_matrix
from dcovforest.dcov import FeatureWeights
from dcovforest.exceptions import (
    ConfigError,
    DimensionMismatchError,
    EmptyDataError,
    FeatureRangeError,
    InsufficientSampleError,
)
from dcovforest.rng import derive_seed, stream

_LOGGER = logging.getLogger("dcovforest")

# Heap storage holds 2^depth leaves per tree.
MAX_DEPTH = 24


@dataclasses.dataclass(slots=True, frozen=True)
class Cell:
    """Hyper-rectangle `[lo, hi)` inside `[0, 1]^d` (closed on any side where `hi_j = 1`)."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def unit(cls, d: int) -> tp.Self:
        return cls(np.zeros(d), np.ones(d))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def split_counts(self) -> np.ndarray:
        """Number of midpoint splits `s_j` along each feature, recovered from side lengths `2^(-s_j)`."""
        return np.rint(-np.log2(self.hi - self.lo)).astype(int)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=np.float64)
        upper_ok = np.where(self.hi >= 1.0, x <= self.hi, x < self.hi)
        return bool(np.all(x >= self.lo) and np.all(upper_ok))


@dataclasses.dataclass(slots=True, frozen=True)
class CenteredTree:
    """A fixed-depth midpoint-split tree.

    `features` and `thresholds` hold the `2^depth - 1` internal nodes in heap order; `leaf_values` and `leaf_counts`
    hold the mean training response and training sample count of each of the `2^depth` leaves.
    """

    depth: int
    features: np.ndarray
    thresholds: np.ndarray
    leaf_values: np.ndarray
    leaf_counts: np.ndarray

    @property
    def n_leaves(self) -> int:
        return 1 << self.depth

    def leaf_index(self, x: np.ndarray) -> np.ndarray:
        """Leaf reached by each row of `x`."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        for _ in range(self.depth):
            go_right = x[rows, self.features[node]] >= self.thresholds[node]
            node = 2 * node + 1 + go_right
        return node - (self.n_leaves - 1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = as_feature_matrix(x)
        return self.leaf_values[self.leaf_index(x)]

    def leaf_cells(self, d: int) -> list[Cell]:
        """Cells of all leaves, in leaf order."""
        cells = [Cell.unit(d)]
        for level in range(self.depth):
            children = []
            first = (1 << level) - 1
            for offset, cell in enumerate(cells):
                j = self.features[first + offset]
                mid = self.thresholds[first + offset]
                left_hi = cell.hi.copy()
                left_hi[j] = mid
                right_lo = cell.lo.copy()
                right_lo[j] = mid
                children.append(Cell(cell.lo, left_hi))
                children.append(Cell(right_lo, cell.hi))
            cells = children
        return cells


@dataclasses.dataclass(slots=True, frozen=True)
class CenteredForest:
    trees: tuple[CenteredTree, ...]
    weights: FeatureWeights
    depth: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def d(self) -> int:
        return self.weights.d

    def predict(self, x) -> np.ndarray:
        """Arithmetic mean of the tree predictions."""
        x = as_feature_matrix(x, self.d)
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.predict(x)
        return total / self.n_trees


def _check_unit_cube(data: Dataset):
    outside = (data.features < 0.0) | (data.features > 1.0) | np.isnan(data.features)
    if outside.any():
        row, column = np.argwhere(outside)[0]
        raise FeatureRangeError(
            f"Centered trees need features in [0, 1]. Row {row}, feature {column} is {data.features[row, column]}."
        )


def _check_depth(depth: int):
    if depth < 0:
        raise ConfigError(f"Tree depth must be non-negative, not: {depth}")
    if depth > MAX_DEPTH:
        raise ConfigError(f"Tree depth {depth} exceeds the supported maximum of {MAX_DEPTH}.")


def build_centered_tree(
    data: Dataset,
    weights: FeatureWeights,
    depth: int,
    rng: np.random.Generator,
) -> CenteredTree:
    """Grow one tree level by level: every node at a level draws its split feature from `weights.p` and splits its cell
    at the midpoint along that feature. Cells with fewer than two training points keep splitting."""
    data.require_nonempty()
    if weights.d != data.d:
        raise DimensionMismatchError(f"Got {weights.d} feature weights for {data.d} features.")
    _check_unit_cube(data)
    _check_depth(depth)

    n_internal = (1 << depth) - 1
    features = np.empty(n_internal, dtype=np.int64)
    thresholds = np.empty(n_internal, dtype=np.float64)

    x = data.features
    rows = np.arange(data.n)
    node = np.zeros(data.n, dtype=np.int64)  # node holding each training row at the current level
    lo = np.zeros((1, data.d))
    hi = np.ones((1, data.d))
    for level in range(depth):
        width = 1 << level
        first = width - 1
        level_features = rng.choice(data.d, size=width, p=weights.p)
        level_nodes = np.arange(width)
        mids = 0.5 * (lo[level_nodes, level_features] + hi[level_nodes, level_features])
        features[first:first + width] = level_features
        thresholds[first:first + width] = mids

        local = node - first
        go_right = x[rows, level_features[local]] >= mids[local]
        node = 2 * node + 1 + go_right

        if level + 1 < depth:
            child_lo = np.repeat(lo, 2, axis=0)
            child_hi = np.repeat(hi, 2, axis=0)
            child_hi[2 * level_nodes, level_features] = mids
            child_lo[2 * level_nodes + 1, level_features] = mids
            lo, hi = child_lo, child_hi

    leaf = node - n_internal
    n_leaves = n_internal + 1
    leaf_counts = np.bincount(leaf, minlength=n_leaves)
    leaf_sums = np.bincount(leaf, weights=data.response, minlength=n_leaves)
    leaf_values = np.zeros(n_leaves)
    occupied = leaf_counts > 0
    leaf_values[occupied] = leaf_sums[occupied] / leaf_counts[occupied]

    return CenteredTree(depth, features, thresholds, leaf_values, leaf_counts)


def predict_tree(tree: CenteredTree, x) -> float:
    """Mean training response in the leaf cell containing the single point `x` (0 for an empty leaf)."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(tree.predict(point)[0])


def build_forest(
    data: Dataset,
    weights: FeatureWeights,
    depth: int,
    n_trees: int,
    seed: int,
    n_jobs: int = 1,
) -> CenteredForest:
    """Build `n_trees` centered trees on the same (full) training data. Tree `t` draws from stream `(seed, t)`, so the
    forest does not depend on `n_jobs`."""
    if n_trees < 1:
        raise ConfigError(f"Forest needs at least one tree, not: {n_trees}")
    data.require_nonempty()
    _check_depth(depth)

    if n_jobs == 1:
        trees = [build_centered_tree(data, weights, depth, stream(seed, t)) for t in range(n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(build_centered_tree)(data, weights, depth, stream(seed, t)) for t in range(n_trees)
        )
    return CenteredForest(tuple(trees), weights, depth, seed)


@dataclasses.dataclass(slots=True, frozen=True)
class DepthSelection:
    depth: int
    candidates: tuple[int, ...]
    cv_errors: tuple[float, ...]  # mean held-out MSE per candidate; empty when there was nothing to choose


def candidate_depths(n: int) -> tuple[int, ...]:
    """Odd depths `h = 2k + 1 <= log2(n)`. Always contains at least depth 1."""
    if n < 1:
        raise EmptyDataError("Cannot choose a depth for an empty training set.")
    max_depth = min(math.log2(n), MAX_DEPTH)
    candidates = tuple(range(1, int(max_depth) + 1, 2))
    return candidates or (1,)


def cv_depth_selection(
    data: Dataset,
    weights: FeatureWeights,
    n_trees: int,
    folds: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
) -> DepthSelection:
    """Choose the candidate depth with the lowest mean held-out MSE over `folds` random partitions (ties go to the
    smaller depth)."""
    if folds < 2:
        raise ConfigError(f"Cross-validation needs at least two folds, not: {folds}")
    if data.n < folds:
        raise InsufficientSampleError(f"Cannot cross-validate {data.n} observations over {folds} folds.")

    candidates = candidate_depths(data.n)
    if len(candidates) == 1:
        return DepthSelection(candidates[0], candidates, ())

    permutation = stream(derive_seed(seed, 0)).permutation(data.n)
    forest_seed = derive_seed(seed, 1)
    fold_indices = np.array_split(permutation, folds)
    errors = []
    for depth in candidates:
        fold_errors = []
        for k, held_out in enumerate(fold_indices):
            train = np.concatenate([f for i, f in enumerate(fold_indices) if i != k])
            forest = build_forest(data.subset(train), weights, depth, n_trees, forest_seed, n_jobs)
            residual = forest.predict(data.features[held_out]) - data.response[held_out]
            fold_errors.append(float(np.mean(residual ** 2)))
        errors.append(float(np.mean(fold_errors)))

    best = 0
    for i in range(1, len(candidates)):
        if errors[i] < errors[best]:
            best = i
    _LOGGER.debug(f"CV depth selection on n = {data.n}: errors {dict(zip(candidates, errors))} -> {candidates[best]}")
    return DepthSelection(candidates[best], candidates, tuple(errors))


def cv_select_depth(
    data: Dataset,
    weights: FeatureWeights,
    n_trees: int,
    folds: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
) -> int:
    return cv_depth_selection(data, weights, n_trees, folds, seed, n_jobs).depth
