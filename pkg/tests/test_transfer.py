from __future__ import annotations

import numpy as np
import pytest

from dcovforest.cart import CartForest, build_cart_forest
from dcovforest.centered import CenteredForest, CenteredTree
from dcovforest.config import CartConfig, CenteredConfig, StageConfig, TransferConfig
from dcovforest.dataset import Dataset
from dcovforest.dcov import FeatureWeights, estimate_feature_weights
from dcovforest.exceptions import DimensionMismatchError, EmptyDataError, InsufficientSampleError
from dcovforest.kinds import DCovKind, Method
from dcovforest.simgen import SimConfig, gen_dataset
from dcovforest.transfer import (
    SplitAssignment,
    TransferModel,
    fit_centered,
    fit_method,
    fit_tlcrf,
    fit_tlsrf,
    predict_transfer,
    residualize,
    split_target,
)


def _config(depth: int | None = 2, n_trees: int = 5, **kwargs) -> TransferConfig:
    stage = StageConfig(
        centered=CenteredConfig(n_trees=n_trees, depth=depth),
        cart=CartConfig(n_trees=n_trees),
    )
    return TransferConfig(source=stage, residual=stage, target=stage, **kwargs)


def _constant_forest(value: float, d: int = 1) -> CenteredForest:
    tree = CenteredTree(0, np.empty(0, dtype=np.int64), np.empty(0), np.array([value]), np.array([1]))
    return CenteredForest((tree,), FeatureWeights.uniform(d), 0, 0)


def test_residualize():
    np.testing.assert_array_equal(residualize([1.0, 2.0], [0.5, 1.5]), [0.5, 0.5])
    np.testing.assert_array_equal(residualize([1.0, 2.0], [1.0, 2.0]), [0.0, 0.0])
    np.testing.assert_array_equal(residualize([0.0], [3.0]), [-3.0])
    with pytest.raises(DimensionMismatchError):
        residualize([1.0, 2.0], [1.0])


def test_split_target_sizes():
    for n_t, sizes in ((10, (5, 5)), (7, (4, 3)), (2, (1, 1))):
        train, weights = split_target(n_t, seed=3)
        assert (train.shape[0], weights.shape[0]) == sizes
        assert not set(train) & set(weights)
        np.testing.assert_array_equal(np.sort(np.concatenate([train, weights])), np.arange(n_t))


def test_split_target_is_deterministic():
    first = split_target(50, seed=11)
    second = split_target(50, seed=11)
    np.testing.assert_array_equal(first[0], second[0])
    np.testing.assert_array_equal(first[1], second[1])
    assert not np.array_equal(first[0], split_target(50, seed=12)[0])


def test_split_target_fraction_and_errors():
    train, weights = split_target(10, seed=0, fraction=0.8)
    assert (train.shape[0], weights.shape[0]) == (8, 2)
    train, weights = split_target(3, seed=0, fraction=0.99)
    assert (train.shape[0], weights.shape[0]) == (2, 1)
    with pytest.raises(InsufficientSampleError):
        split_target(1, seed=0)


def test_split_assignment_must_be_disjoint_cover():
    assignment = SplitAssignment(np.array([0, 2]), np.array([1, 3]))
    assert assignment.n == 4
    with pytest.raises(ValueError):
        assignment.train[0] = 5
    with pytest.raises(ValueError):
        SplitAssignment(np.array([0, 1]), np.array([1, 2]))
    with pytest.raises(ValueError):
        SplitAssignment(np.array([0, 1]), np.array([3]))


def test_predict_transfer_adds_stages():
    model = TransferModel(
        Method.TLCRF,
        _constant_forest(2.0),
        _constant_forest(0.5),
        FeatureWeights([1.0]),
        SplitAssignment(np.array([0]), np.array([1])),
        seed=0,
    )
    assert predict_transfer(model, [0.3]) == 2.5
    zero_residual = TransferModel(
        Method.TLCRF,
        _constant_forest(2.0),
        _constant_forest(0.0),
        FeatureWeights([1.0]),
        SplitAssignment(np.array([0]), np.array([1])),
        seed=0,
    )
    assert predict_transfer(zero_residual, [0.3]) == 2.0


def test_transfer_model_dimension_check():
    with pytest.raises(DimensionMismatchError):
        TransferModel(
            Method.TLCRF,
            _constant_forest(1.0, d=2),
            _constant_forest(1.0, d=3),
            FeatureWeights.uniform(3),
            SplitAssignment(np.array([0]), np.array([1])),
            seed=0,
        )


def test_hand_traced_toy_pipeline():
    source = Dataset(np.array([[0.1], [0.2], [0.9]]), np.array([1.0, 3.0, 5.0]))
    target = Dataset(np.array([[0.1], [0.3], [0.6], [0.8]]), np.array([3.0, 4.0, 6.0, 8.0]))
    model = fit_tlcrf(source, target, _config(depth=1, n_trees=3, seed=4))

    # Source leaves: [0, 0.5) -> mean(1, 3) = 2, [0.5, 1] -> 5.
    np.testing.assert_array_equal(model.predict_source(target.features), [2.0, 2.0, 5.0, 5.0])
    residuals = np.array([1.0, 2.0, 1.0, 3.0])
    train = model.split_assignment.train
    for query in (0.2, 0.7):
        same_side = [i for i in train if (target.features[i, 0] >= 0.5) == (query >= 0.5)]
        expected_residual = residuals[same_side].mean() if same_side else 0.0
        source_value = 2.0 if query < 0.5 else 5.0
        assert predict_transfer(model, [query]) == pytest.approx(source_value + expected_residual, abs=1e-12)
    np.testing.assert_array_equal(model.dcov_weights.p, [1.0])


def test_identical_domains_without_noise_reduce_to_source():
    rng = np.random.default_rng(0)
    source = Dataset(rng.uniform(size=(200, 2)), np.full(200, 2.0))
    target = Dataset(rng.uniform(size=(40, 2)), np.full(40, 2.0))
    points = rng.uniform(size=(30, 2))

    model = fit_tlcrf(source, target, _config(depth=2))
    assert model.dcov_weights.is_uniform
    np.testing.assert_array_equal(model.predict_residual(points), np.zeros(30))
    np.testing.assert_array_equal(model.predict(points), model.predict_source(points))

    model = fit_tlsrf(source, target, _config())
    assert isinstance(model.source_forest, CartForest)
    np.testing.assert_array_equal(model.predict(points), np.full(30, 2.0))


def test_additivity_and_split_hygiene(small_source, small_target):
    model = fit_tlcrf(small_source, small_target, _config(depth=3, seed=5))
    points = np.random.default_rng(1).uniform(size=(40, small_source.d))
    np.testing.assert_array_equal(model.predict(points), model.predict_source(points) + model.predict_residual(points))

    split = model.split_assignment
    assert split.n == small_target.n
    assert set(split.train.tolist()).isdisjoint(split.weights.tolist())
    for tree in model.residual_forest.trees:
        assert tree.leaf_counts.sum() == split.train.shape[0]

    residuals = residualize(small_target.response, model.predict_source(small_target.features))
    expected, _ = estimate_feature_weights(
        small_target.features[split.weights], residuals[split.weights], DCovKind.FastU
    )
    assert model.dcov_weights == expected


def test_residual_identity(small_source, small_target):
    model = fit_tlcrf(small_source, small_target, _config(depth=3))
    source_preds = model.predict_source(small_target.features)
    residuals = residualize(small_target.response, source_preds)
    np.testing.assert_allclose(source_preds + residuals, small_target.response, rtol=0, atol=1e-12)


def test_source_forest_uses_uniform_weights(small_source, small_target):
    model = fit_tlsrf(small_source, small_target, _config(seed=2))
    assert model.source_forest.weights.is_uniform
    assert model.residual_forest.weights == model.dcov_weights
    assert model.method == Method.TLSRF


def test_transfer_is_deterministic(small_source, small_target):
    points = np.random.default_rng(2).uniform(size=(20, small_source.d))
    first = fit_tlcrf(small_source, small_target, _config(depth=3, seed=9))
    second = fit_tlcrf(small_source, small_target, _config(depth=3, seed=9))
    threaded = fit_tlcrf(small_source, small_target, _config(depth=3, seed=9, n_jobs=2))
    np.testing.assert_array_equal(first.predict(points), second.predict(points))
    np.testing.assert_array_equal(first.predict(points), threaded.predict(points))


def test_transfer_input_errors(small_source, small_target):
    with pytest.raises(InsufficientSampleError):
        fit_tlcrf(small_source, small_target.subset([0]), _config())
    with pytest.raises(DimensionMismatchError):
        fit_tlcrf(small_source, Dataset(np.zeros((5, 2)), np.zeros(5)), _config())
    with pytest.raises(EmptyDataError):
        fit_tlcrf(small_source.subset([]), small_target, _config())


def test_fit_centered_falls_back_to_depth_one():
    data = Dataset(np.array([[0.1], [0.4], [0.8]]), np.array([1.0, 2.0, 3.0]))
    forest = fit_centered(data, FeatureWeights([1.0]), CenteredConfig(n_trees=2, folds=5), seed=0)
    assert forest.depth == 1


def test_fit_centered_cross_validates_depth(small_target):
    forest = fit_centered(small_target, FeatureWeights.uniform(small_target.d), CenteredConfig(n_trees=3), seed=0)
    assert forest.depth in (1, 3, 5)


def test_fit_method_dispatch(small_source, small_target):
    config = _config(depth=2)
    assert isinstance(fit_method("CRF", None, small_target, config), CenteredForest)
    assert isinstance(fit_method(Method.SRF, None, small_target, config), CartForest)
    assert isinstance(fit_method(Method.TLCRF, small_source, small_target, config), TransferModel)
    assert isinstance(fit_method(Method.TLSRF, small_source, small_target, config), TransferModel)

    source_only = fit_method(Method.SourceOnly, small_source, None, config)
    assert isinstance(source_only, CenteredForest)
    assert source_only.trees[0].leaf_counts.sum() == small_source.n

    rfdcov = fit_method(Method.RFDCOV, None, small_target, config)
    assert isinstance(rfdcov, CartForest)
    expected, _ = estimate_feature_weights(small_target.features, small_target.response, DCovKind.FastU)
    assert rfdcov.weights == expected

    with pytest.raises(EmptyDataError):
        fit_method(Method.TLCRF, None, small_target, config)
    with pytest.raises(EmptyDataError):
        fit_method(Method.CRF, small_source, None, config)
    with pytest.raises(ValueError):
        fit_method("GBM", small_source, small_target, config)


def test_full_mtry_residual_forest_ignores_weights(small_source, small_target):
    config = _config(seed=6).with_mtry(small_source.d)
    model = fit_tlsrf(small_source, small_target, config)
    assert not model.dcov_weights.is_uniform

    # With `mtry = d` every node considers every feature, so an unweighted forest on the same rows is identical.
    train = model.split_assignment.train
    residuals = residualize(small_target.response, model.predict_source(small_target.features))
    residual_data = Dataset(small_target.features[train], residuals[train])
    forest = model.residual_forest
    unweighted = build_cart_forest(
        residual_data, None, forest.n_trees, forest.mtry, forest.n_boot, forest.max_depth, forest.seed,
        bootstrap=forest.bootstrap,
    )
    points = np.random.default_rng(3).uniform(size=(15, small_source.d))
    np.testing.assert_array_equal(forest.predict(points), unweighted.predict(points))


@pytest.mark.slow
def test_difference_features_get_larger_weights():
    config = _config(depth=7, n_trees=20)
    separated = 0
    for seed in range(50):
        sim = SimConfig(n_s=5000, n_t=400, n_test=0, d=20, r=0.1, noise_sd=1.0, seed=seed)
        model = fit_tlcrf(gen_dataset(sim, "source"), gen_dataset(sim, "target"), config.replace(seed=seed))
        p = model.dcov_weights.p
        separated += p[sim.difference_features].mean() > p[sim.shared_features].mean()
    assert separated >= 45
