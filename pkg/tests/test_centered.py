from __future__ import annotations

import numpy as np
import pytest

from dcovforest.centered import (
    MAX_DEPTH,
    CenteredForest,
    CenteredTree,
    build_centered_tree,
    build_forest,
    candidate_depths,
    cv_depth_selection,
    cv_select_depth,
    predict_tree,
)
from dcovforest.dataset import Dataset
from dcovforest.dcov import FeatureWeights
from dcovforest.exceptions import (
    ConfigError,
    DimensionMismatchError,
    EmptyDataError,
    FeatureRangeError,
    InsufficientSampleError,
)
from dcovforest.rng import stream


def _random_data(rng, n: int = 60, d: int = 3) -> Dataset:
    x = rng.uniform(size=(n, d))
    return Dataset(x, x.sum(axis=1) + rng.normal(scale=0.1, size=n))


def test_one_feature_depth_two_cells(toy_1d):
    tree = build_centered_tree(toy_1d, FeatureWeights([1.0]), 2, stream(0))
    cells = tree.leaf_cells(1)
    assert [(c.lo[0], c.hi[0]) for c in cells] == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]
    np.testing.assert_array_equal(tree.leaf_counts, [2, 0, 0, 1])


def test_depth_zero_predicts_global_mean(toy_1d):
    tree = build_centered_tree(toy_1d, FeatureWeights([1.0]), 0, stream(0))
    assert tree.n_leaves == 1
    assert predict_tree(tree, [0.42]) == pytest.approx(3.0)


def test_degenerate_weights_split_one_feature(rng):
    data = _random_data(rng, d=2)
    tree = build_centered_tree(data, FeatureWeights([1.0, 0.0]), 3, stream(1))
    assert np.all(tree.features == 0)
    cells = tree.leaf_cells(2)
    assert len(cells) == 8
    for cell in cells:
        assert (cell.lo[1], cell.hi[1]) == (0.0, 1.0)


def test_predict_tree_hand_values(toy_1d):
    tree = build_centered_tree(toy_1d, FeatureWeights([1.0]), 1, stream(0))
    assert predict_tree(tree, [0.3]) == 2.0
    assert predict_tree(tree, [0.7]) == 5.0
    assert predict_tree(tree, [0.5]) == 5.0  # boundary goes right
    assert predict_tree(tree, [1.0]) == 5.0


def test_empty_leaf_predicts_zero(toy_1d):
    tree = build_centered_tree(toy_1d, FeatureWeights([1.0]), 2, stream(0))
    assert predict_tree(tree, [0.3]) == 0.0
    assert predict_tree(tree, [0.1]) == 2.0


def test_leaf_cells_tile_unit_cube(rng):
    data = _random_data(rng, d=3)
    weights = FeatureWeights([0.5, 0.3, 0.2])
    tree = build_centered_tree(data, weights, 6, stream(5))
    cells = tree.leaf_cells(3)
    assert sum(cell.volume for cell in cells) == pytest.approx(1.0, abs=1e-12)

    points = rng.uniform(size=(500, 3))
    points[:20] = np.round(points[:20] * 8) / 8  # land some points on split boundaries
    leaves = tree.leaf_index(points)
    for point, leaf in zip(points, leaves):
        containing = [i for i, cell in enumerate(cells) if cell.contains(point)]
        assert containing == [leaf]


def test_side_length_law(rng):
    data = _random_data(rng, d=4)
    depth = 7
    tree = build_centered_tree(data, FeatureWeights([0.4, 0.3, 0.2, 0.1]), depth, stream(11))
    for cell in tree.leaf_cells(4):
        counts = cell.split_counts()
        assert counts.sum() == depth
        np.testing.assert_array_equal(cell.hi - cell.lo, 2.0 ** -counts)


def test_thresholds_are_cell_midpoints(rng):
    data = _random_data(rng, d=2)
    tree = build_centered_tree(data, FeatureWeights([0.5, 0.5]), 4, stream(3))
    # Rebuild the cells level by level and compare against the stored midpoints.
    cells = [(np.zeros(2), np.ones(2))]
    for level in range(4):
        first = (1 << level) - 1
        children = []
        for offset, (lo, hi) in enumerate(cells):
            j = tree.features[first + offset]
            assert tree.thresholds[first + offset] == 0.5 * (lo[j] + hi[j])
            left_hi, right_lo = hi.copy(), lo.copy()
            left_hi[j] = right_lo[j] = tree.thresholds[first + offset]
            children += [(lo, left_hi), (right_lo, hi)]
        cells = children


def test_leaf_values_are_leaf_means(rng):
    data = _random_data(rng, n=200, d=2)
    tree = build_centered_tree(data, FeatureWeights([0.5, 0.5]), 3, stream(4))
    leaves = tree.leaf_index(data.features)
    for leaf in range(tree.n_leaves):
        members = data.response[leaves == leaf]
        assert tree.leaf_counts[leaf] == members.shape[0]
        expected = members.mean() if members.size else 0.0
        assert tree.leaf_values[leaf] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_split_feature_frequencies(rng):
    data = _random_data(rng, n=50, d=2)
    weights = FeatureWeights([0.7, 0.3])
    features = np.concatenate([build_centered_tree(data, weights, 10, stream(21, t)).features for t in range(10)])
    assert features.shape[0] >= 10000
    assert np.mean(features == 0) == pytest.approx(0.7, abs=0.02)


def test_forest_is_mean_of_trees(rng):
    data = _random_data(rng)
    forest = build_forest(data, FeatureWeights.uniform(3), 3, 7, seed=8)
    x = rng.uniform(size=(40, 3))
    expected = sum(tree.predict(x) for tree in forest.trees) / 7
    np.testing.assert_allclose(forest.predict(x), expected, rtol=0, atol=1e-15)
    assert forest.n_trees == 7
    assert forest.d == 3


def test_single_tree_forest_equals_tree(rng):
    data = _random_data(rng)
    forest = build_forest(data, FeatureWeights.uniform(3), 4, 1, seed=2)
    x = rng.uniform(size=(25, 3))
    np.testing.assert_array_equal(forest.predict(x), forest.trees[0].predict(x))


def test_forest_averages_two_trees():
    trees = tuple(
        CenteredTree(0, np.empty(0, dtype=np.int64), np.empty(0), np.array([value]), np.array([1]))
        for value in (1.0, 3.0)
    )
    forest = CenteredForest(trees, FeatureWeights([1.0]), 0, 0)
    assert forest.predict([[0.5]])[0] == 2.0


def test_forest_is_deterministic(rng):
    data = _random_data(rng)
    weights = FeatureWeights([0.6, 0.2, 0.2])
    x = rng.uniform(size=(30, 3))
    first = build_forest(data, weights, 4, 12, seed=33)
    second = build_forest(data, weights, 4, 12, seed=33)
    threaded = build_forest(data, weights, 4, 12, seed=33, n_jobs=3)
    np.testing.assert_array_equal(first.predict(x), second.predict(x))
    np.testing.assert_array_equal(first.predict(x), threaded.predict(x))
    other = build_forest(data, weights, 4, 12, seed=34)
    assert not np.array_equal(first.predict(x), other.predict(x))


def test_build_errors(rng):
    data = _random_data(rng)
    with pytest.raises(EmptyDataError):
        build_centered_tree(Dataset(np.empty((0, 2)), np.empty(0)), FeatureWeights.uniform(2), 1, stream(0))
    with pytest.raises(DimensionMismatchError):
        build_centered_tree(data, FeatureWeights.uniform(2), 1, stream(0))
    with pytest.raises(ConfigError):
        build_centered_tree(data, FeatureWeights.uniform(3), MAX_DEPTH + 1, stream(0))
    with pytest.raises(ConfigError):
        build_forest(data, FeatureWeights.uniform(3), 2, 0, seed=0)


@pytest.mark.parametrize("bad", [-0.1, 1.5, np.nan])
def test_features_outside_unit_cube_are_rejected(rng, bad):
    data = _random_data(rng)
    features = data.features.copy()
    features[4, 2] = bad
    with pytest.raises(FeatureRangeError, match="Row 4, feature 2"):
        build_forest(Dataset(features, data.response), FeatureWeights.uniform(3), 2, 3, seed=0)


def test_unit_cube_boundaries_are_accepted():
    data = Dataset(np.array([[0.0], [1.0], [0.5]]), np.array([1.0, 2.0, 3.0]))
    tree = build_centered_tree(data, FeatureWeights([1.0]), 1, stream(0))
    np.testing.assert_array_equal(tree.leaf_counts, [1, 2])


def test_candidate_depths():
    assert candidate_depths(100) == (1, 3, 5)
    assert candidate_depths(2) == (1,)
    assert candidate_depths(1) == (1,)
    assert candidate_depths(512) == (1, 3, 5, 7, 9)


def test_cv_selection_with_single_candidate():
    data = Dataset(np.array([[0.1], [0.2], [0.3]]), np.array([0.0, 1.0, 2.0]))
    selection = cv_depth_selection(data, FeatureWeights([1.0]), 5, folds=2, seed=0)
    assert selection.depth == 1
    assert selection.cv_errors == ()


def test_cv_needs_folds_worth_of_rows():
    data = Dataset(np.array([[0.1], [0.2], [0.3]]), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(InsufficientSampleError):
        cv_select_depth(data, FeatureWeights([1.0]), 5, folds=5, seed=0)


def test_cv_prefers_deeper_trees_for_strong_signal():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(512, 1))
    data = Dataset(x, 10.0 * x[:, 0] + rng.normal(scale=0.5, size=512))
    selection = cv_depth_selection(data, FeatureWeights([1.0]), 5, folds=5, seed=1)
    assert selection.candidates == (1, 3, 5, 7, 9)
    assert len(selection.cv_errors) == 5
    assert selection.depth >= 3
    assert selection.cv_errors[selection.candidates.index(selection.depth)] == min(selection.cv_errors)


@pytest.mark.slow
def test_cv_depth_selection_monte_carlo():
    deep = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        x = rng.uniform(size=(512, 1))
        data = Dataset(x, 10.0 * x[:, 0] + rng.normal(scale=0.5, size=512))
        deep += cv_select_depth(data, FeatureWeights([1.0]), 10, folds=5, seed=seed) >= 3
    assert deep >= 45
