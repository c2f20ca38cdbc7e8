"""Transfer pipelines from a large source sample to a small target sample under posterior drift.

Both pipelines run three stages:

    1. Fit a source forest on the source data with uniform feature weights.
    2. Residualize every target response against the source forest's prediction.
    3. Split the target rows in two. The `weights` half supplies `(X, residual)` pairs for distance covariance feature
       weights; the `train` half trains a residual forest with those weights.

The transfer prediction is the source prediction plus the residual prediction. `fit_tlcrf` uses centered forests
throughout and `fit_tlsrf` uses weighted CART forests. `fit_method` also fits the non-transfer baselines.
"""
from __future__ import annotations

__all__ = [
    "Forest",
    "FittedModel",
    "SplitAssignment",
    "TransferModel",
    "residualize",
    "split_target",
    "fit_centered",
    "fit_cart",
    "fit_tlcrf",
    "fit_tlsrf",
    "predict_transfer",
    "fit_method",
]

import dataclasses
import logging
import math
import typing as tp

import numpy as np

from dcovforest.cart import CartForest, build_cart_forest
from dcovforest.centered import CenteredForest, build_forest, cv_select_depth
from dcovforest.config import CartConfig, CenteredConfig, TransferConfig
from dcovforest.dataset import Dataset, as_feature_matrix
from dcovforest.dcov import FeatureWeights, estimate_feature_weights
from dcovforest.exceptions import DimensionMismatchError, EmptyDataError, InsufficientSampleError
from dcovforest.kinds import DCovKind, Method
from dcovforest.rng import derive_seed, stream

_LOGGER = logging.getLogger("dcovforest")

Forest = CenteredForest | CartForest

# Stage keys for `derive_seed(config.seed, stage)`.
_SPLIT_STAGE = 0
_SOURCE_STAGE = 1
_RESIDUAL_STAGE = 2
_TARGET_STAGE = 3


@tp.runtime_checkable
class FittedModel(tp.Protocol):
    """Anything `fit_method` returns: a forest or a `TransferModel`."""

    @property
    def d(self) -> int:
        ...

    def predict(self, x) -> np.ndarray:
        ...


@dataclasses.dataclass(slots=True, frozen=True)
class SplitAssignment:
    """Disjoint cover of the target rows: `train` rows fit the residual forest, `weights` rows estimate its feature
    weights."""

    train: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.int64)
        combined = np.concatenate([train, weights])
        if np.unique(combined).shape[0] != combined.shape[0]:
            raise ValueError("Target split halves overlap.")
        if combined.size and not np.array_equal(np.sort(combined), np.arange(combined.shape[0])):
            raise ValueError("Target split halves do not cover all target rows.")
        train.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.train.shape[0] + self.weights.shape[0]


@dataclasses.dataclass(slots=True, frozen=True)
class TransferModel:
    method: Method
    source_forest: Forest
    residual_forest: Forest
    dcov_weights: FeatureWeights
    split_assignment: SplitAssignment
    seed: int

    def __post_init__(self):
        if self.source_forest.d != self.residual_forest.d:
            raise DimensionMismatchError(
                f"Source forest has {self.source_forest.d} features, residual forest has {self.residual_forest.d}."
            )

    @property
    def d(self) -> int:
        return self.source_forest.d

    def predict_source(self, x) -> np.ndarray:
        return self.source_forest.predict(as_feature_matrix(x, self.d))

    def predict_residual(self, x) -> np.ndarray:
        return self.residual_forest.predict(as_feature_matrix(x, self.d))

    def predict(self, x) -> np.ndarray:
        x = as_feature_matrix(x, self.d)
        return self.source_forest.predict(x) + self.residual_forest.predict(x)


def residualize(y_target, source_preds) -> np.ndarray:
    """Target responses minus source predictions, elementwise."""
    y_target = np.asarray(y_target, dtype=np.float64).ravel()
    source_preds = np.asarray(source_preds, dtype=np.float64).ravel()
    if y_target.shape != source_preds.shape:
        raise DimensionMismatchError(
            f"Got {y_target.shape[0]} target responses but {source_preds.shape[0]} source predictions."
        )
    return y_target - source_preds


def split_target(n_t: int, seed: int, fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Randomly split `range(n_t)` into `(train, weights)` index arrays of sizes `ceil(fraction * n_t)` and the rest.
    Each array is sorted."""
    if n_t < 2:
        raise InsufficientSampleError(f"Cannot split {n_t} target observations into two non-empty parts.")
    n_train = min(max(math.ceil(fraction * n_t), 1), n_t - 1)
    permutation = stream(seed).permutation(n_t)
    return np.sort(permutation[:n_train]), np.sort(permutation[n_train:])


def fit_centered(
    data: Dataset,
    weights: FeatureWeights,
    config: CenteredConfig,
    seed: int,
    n_jobs: int = 1,
) -> CenteredForest:
    """Centered forest with the configured depth, or a cross-validated one. Falls back to depth 1 (with a warning) if
    there are fewer rows than folds."""
    depth = config.fixed_depth()
    if depth is None:
        if data.n < config.folds:
            _LOGGER.warning(
                f"Only {data.n} training observations for {config.folds}-fold depth selection. Using depth 1."
            )
            depth = 1
        else:
            depth = cv_select_depth(data, weights, config.n_trees, config.folds, derive_seed(seed, 1), n_jobs)
    _LOGGER.debug(f"Fitting centered forest: n = {data.n}, depth {depth}, {config.n_trees} trees")
    return build_forest(data, weights, depth, config.n_trees, derive_seed(seed, 0), n_jobs)


def fit_cart(
    data: Dataset,
    weights: FeatureWeights,
    config: CartConfig,
    seed: int,
    n_jobs: int = 1,
) -> CartForest:
    n_boot = config.resolve_n_boot(data.n)
    return build_cart_forest(
        data,
        weights,
        n_trees=config.n_trees,
        mtry=config.resolve_mtry(data.d),
        n_boot=n_boot,
        max_depth=config.resolve_max_depth(n_boot),
        seed=seed,
        n_jobs=n_jobs,
        bootstrap=config.bootstrap,
    )


def _check_domains(source: Dataset, target: Dataset):
    source.require_nonempty("source set")
    if target.n < 2:
        raise InsufficientSampleError(f"Transfer needs at least 2 target observations, not: {target.n}")
    if source.d != target.d:
        raise DimensionMismatchError(f"Source data has {source.d} features, target data has {target.d}.")


def _residual_weights(features: np.ndarray, residuals: np.ndarray, kind: DCovKind) -> FeatureWeights:
    if residuals.shape[0] < kind.min_samples:
        _LOGGER.warning(
            f"Only {residuals.shape[0]} rows for {kind} distance covariance weights. Using the V-statistic instead."
        )
        kind = DCovKind.V
    weights, _ = estimate_feature_weights(features, residuals, kind)
    return weights


def _fit_transfer(
    method: Method,
    source: Dataset,
    target: Dataset,
    config: TransferConfig,
    fit_stage: tp.Callable[[Dataset, FeatureWeights, str, int], Forest],
) -> TransferModel:
    _check_domains(source, target)

    # Stage 1: source forest with uniform weights.
    uniform = FeatureWeights.uniform(source.d)
    source_forest = fit_stage(source, uniform, "source", derive_seed(config.seed, _SOURCE_STAGE))

    # Stage 2: residuals on every target row.
    residuals = residualize(target.response, source_forest.predict(target.features))

    # Stage 3: weights from one half, residual forest on the other.
    train_rows, weight_rows = split_target(target.n, derive_seed(config.seed, _SPLIT_STAGE), config.split_fraction)
    dcov_weights = _residual_weights(target.features[weight_rows], residuals[weight_rows], config.dcov_kind)
    residual_data = Dataset(target.features[train_rows], residuals[train_rows], target.feature_names)
    residual_forest = fit_stage(residual_data, dcov_weights, "residual", derive_seed(config.seed, _RESIDUAL_STAGE))

    _LOGGER.debug(
        f"Fitted {method}: n_s = {source.n}, n_t = {target.n} ({train_rows.shape[0]} train / "
        f"{weight_rows.shape[0]} weights), max residual weight {dcov_weights.p.max():.4f}"
    )
    return TransferModel(
        method, source_forest, residual_forest, dcov_weights, SplitAssignment(train_rows, weight_rows), config.seed
    )


def fit_tlcrf(source: Dataset, target: Dataset, config: TransferConfig | None = None) -> TransferModel:
    """Transfer pipeline with centered forests for both the source and residual stages."""
    config = config or TransferConfig()

    def fit_stage(data: Dataset, weights: FeatureWeights, stage: str, seed: int) -> Forest:
        return fit_centered(data, weights, getattr(config, stage).centered, seed, config.n_jobs)

    return _fit_transfer(Method.TLCRF, source, target, config, fit_stage)


def fit_tlsrf(source: Dataset, target: Dataset, config: TransferConfig | None = None) -> TransferModel:
    """Transfer pipeline with weighted CART forests; the residual forest draws its `mtry` subsets with the residual
    distance covariance weights."""
    config = config or TransferConfig()

    def fit_stage(data: Dataset, weights: FeatureWeights, stage: str, seed: int) -> Forest:
        return fit_cart(data, weights, getattr(config, stage).cart, seed, config.n_jobs)

    return _fit_transfer(Method.TLSRF, source, target, config, fit_stage)


def predict_transfer(model: TransferModel, x) -> float:
    """Source plus residual prediction at the single point `x`."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(model.predict(point)[0])


def fit_method(
    method: Method | str,
    source: Dataset | None,
    target: Dataset | None,
    config: TransferConfig | None = None,
) -> FittedModel:
    """Fit any supported method.

    `CRF`, `SRF` and `RFDCOV` train on the target data only; `RFDCOV` weights its CART subsets with distance
    covariance estimated on all target rows. `SourceOnly` is a uniform-weight centered forest on the source data
    alone. `TLCRF` and `TLSRF` need both samples.
    """
    method = Method(method)
    config = config or TransferConfig()
    if method.uses_source and source is None:
        raise EmptyDataError(f"Method {method} needs source data.")
    if method.uses_target and target is None:
        raise EmptyDataError(f"Method {method} needs target data.")

    seed = derive_seed(config.seed, _TARGET_STAGE)
    match method:
        case Method.TLCRF:
            return fit_tlcrf(source, target, config)
        case Method.TLSRF:
            return fit_tlsrf(source, target, config)
        case Method.SourceOnly:
            source.require_nonempty("source set")
            source_seed = derive_seed(config.seed, _SOURCE_STAGE)
            uniform = FeatureWeights.uniform(source.d)
            return fit_centered(source, uniform, config.source.centered, source_seed, config.n_jobs)
        case Method.CRF:
            target.require_nonempty("target set")
            return fit_centered(target, FeatureWeights.uniform(target.d), config.target.centered, seed, config.n_jobs)
        case Method.SRF:
            target.require_nonempty("target set")
            return fit_cart(target, FeatureWeights.uniform(target.d), config.target.cart, seed, config.n_jobs)
        case Method.RFDCOV:
            target.require_nonempty("target set")
            weights = _residual_weights(target.features, target.response, config.dcov_kind)
            return fit_cart(target, weights, config.target.cart, seed, config.n_jobs)
    raise ValueError(f"Unsupported method: {method}")
