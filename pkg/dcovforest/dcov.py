"""Sample distance covariance estimators and the feature weights built from them.

Three estimators of the squared distance covariance between two univariate samples are provided:

    `dcov_v2`: biased V-statistic, `(1/n^2) sum A_kl B_kl` over double-centered distance matrices. Never negative.
    `dcov_u`: unbiased U-statistic over U-centered distance matrices. O(n^2) time and memory; the reference form.
    `dcov_fast`: the same unbiased statistic in O(n log n) time, computed from sorted row sums and a bottom-up merge
        pass that accumulates the discordant-pair terms.

`feature_weights` turns per-feature estimates into a probability vector (negative estimates clamped to zero, uniform
fallback when everything vanishes).
"""
from __future__ import annotations

__all__ = [
    "STREAMING_THRESHOLD",
    "DCovEstimate",
    "FeatureWeights",
    "pairwise_dist",
    "dcov_v2",
    "dcov_u",
    "dcov_fast",
    "dcov",
    "feature_weights",
    "estimate_feature_weights",
]

import dataclasses
import logging
import typing as tp

import numpy as np

from dcovforest.exceptions import (
    DimensionMismatchError,
    EmptyDataError,
    InsufficientSampleError,
    InvalidWeightsError,
)
from dcovforest.kinds import DCovKind

_LOGGER = logging.getLogger("dcovforest")

# Above this sample size the V-statistic is assembled from row statistics instead of n x n matrices.
STREAMING_THRESHOLD = 20000

# Estimates at or below this are treated as zero dependence when building weights.
WEIGHT_EPSILON = 1e-12


@dataclasses.dataclass(slots=True, frozen=True)
class DCovEstimate:
    """A sample squared distance covariance value, with the estimator that produced it."""

    value: float
    kind: DCovKind
    n: int

    def __post_init__(self):
        if self.kind == DCovKind.V and self.value < 0:
            raise ValueError(f"V-statistic estimate cannot be negative: {self.value}")
        if self.kind.is_unbiased and self.n < 4:
            raise InsufficientSampleError(
                f"insufficient sample for U-statistic: n = {self.n} (need at least 4)"
            )

    def __float__(self) -> float:
        return self.value


@dataclasses.dataclass(slots=True, frozen=True)
class FeatureWeights:
    """Probability vector over `d` features, used for split-feature (or feature-subset) sampling."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).ravel()
        if p.size == 0:
            raise InvalidWeightsError("Feature weights cannot be empty.")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidWeightsError(f"Feature weights must be finite and non-negative: {p}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidWeightsError(f"Feature weights must sum to 1, not {p.sum()!r}.")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, d: int) -> tp.Self:
        if d < 1:
            raise InvalidWeightsError(f"Need at least one feature for uniform weights, not: {d}")
        return cls(np.full(d, 1.0 / d))

    @property
    def d(self) -> int:
        return self.p.shape[0]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.p == self.p[0]))

    def __len__(self) -> int:
        return self.d

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureWeights):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())

    def to_list(self) -> list[float]:
        return [float(v) for v in self.p]


def _as_sample_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"Samples have different lengths: {x.shape[0]} and {y.shape[0]}.")
    if x.shape[0] == 0:
        raise EmptyDataError("Distance covariance needs at least one observation.")
    return x, y


def _require_u_sample(n: int):
    if n < 4:
        raise InsufficientSampleError(f"insufficient sample for U-statistic: n = {n} (need at least 4)")


def pairwise_dist(x) -> np.ndarray:
    """Matrix of absolute differences `|x_k - x_l|`."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] == 0:
        raise EmptyDataError("Cannot build a distance matrix for an empty sample.")
    return np.abs(x[:, np.newaxis] - x[np.newaxis, :])


def _double_centered(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    row_means = a.sum(axis=1, keepdims=True) / n
    col_means = a.sum(axis=0, keepdims=True) / n
    grand_mean = a.sum() / (n * n)
    return a - row_means - col_means + grand_mean


def _u_centered(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    row_terms = a.sum(axis=1, keepdims=True) / (n - 2)
    col_terms = a.sum(axis=0, keepdims=True) / (n - 2)
    grand_term = a.sum() / ((n - 1) * (n - 2))
    centered = a - row_terms - col_terms + grand_term
    np.fill_diagonal(centered, 0.0)
    return centered


def _row_sums(x: np.ndarray) -> np.ndarray:
    """`sum_l |x_k - x_l|` for every k, from one stable sort."""
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    before = np.cumsum(xs) - xs  # exclusive prefix sums
    ranks = np.arange(n, dtype=np.float64)
    sorted_sums = xs * (2.0 * ranks - n) + xs.sum() - 2.0 * before
    row_sums = np.empty(n, dtype=np.float64)
    row_sums[order] = sorted_sums
    return row_sums


def _discordant_sum(xs: np.ndarray, ys: np.ndarray) -> float:
    """Sum of `(x_i - x_j)(y_i - y_j)` over pairs with `j` before `i` in the (x-sorted) input order and `y_j > y_i`.

    Bottom-up merge over y-ranks: at width `w`, each block of `2w` positions is merged from its two sorted halves, and
    every right-half element collects the weight sums `(1, x, y, xy)` of left-half elements ranked above it. Every pair
    meets exactly once, at the first width where both positions share a block.
    """
    n = xs.shape[0]
    y_rank = np.empty(n, dtype=np.int64)
    y_rank[np.argsort(ys, kind="stable")] = np.arange(n)  # ties resolved by index order
    weights = np.stack([np.ones(n), xs, ys, xs * ys])
    collected = np.zeros((4, n))

    order = np.arange(n, dtype=np.int64)  # positions, sorted by y-rank within every run of `width`
    positions = np.arange(n)
    width = 1
    while width < n:
        block = order // (2 * width)
        # Keys are already in sorted runs of `width`, so the stable (timsort) argsort is a merge.
        merged = order[np.argsort(block * n + y_rank[order], kind="stable")]
        merged_block = merged // (2 * width)
        is_left = (merged // width) % 2 == 0

        left_weights = weights[:, merged] * is_left
        running = np.cumsum(left_weights, axis=1)
        block_end = np.searchsorted(merged_block, merged_block, side="right") - 1
        above = running[:, block_end] - running[:, positions]  # left-half weights later in the merged block

        is_right = ~is_left
        collected[:, merged[is_right]] += above[:, is_right]

        order = merged
        width *= 2

    count, sum_x, sum_y, sum_xy = collected
    return float(np.sum(xs * ys * count - xs * sum_y - ys * sum_x + sum_xy))


def _dcov_terms(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Return `(sum_kl a_kl b_kl, sum_k a_k. b_k., a.., b..)` in O(n log n)."""
    n = x.shape[0]
    # Both statistics are translation invariant; centering keeps the products below small.
    x = x - x.mean()
    y = y - y.mean()

    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    all_pairs = 2.0 * n * float(np.dot(xs, ys)) - 2.0 * float(xs.sum()) * float(ys.sum())
    product_sum = all_pairs - 4.0 * _discordant_sum(xs, ys)

    a_rows = _row_sums(x)
    b_rows = _row_sums(y)
    return product_sum, float(np.dot(a_rows, b_rows)), float(a_rows.sum()), float(b_rows.sum())


def dcov_v2(x, y) -> DCovEstimate:
    """Biased (V-statistic) squared distance covariance."""
    x, y = _as_sample_pair(x, y)
    n = x.shape[0]
    if n > STREAMING_THRESHOLD:
        product_sum, row_product_sum, a_total, b_total = _dcov_terms(x, y)
        value = product_sum / n ** 2 - 2.0 * row_product_sum / n ** 3 + a_total * b_total / n ** 4
    else:
        a = _double_centered(pairwise_dist(x))
        b = _double_centered(pairwise_dist(y))
        value = float(np.sum(a * b)) / (n * n)
    return DCovEstimate(max(value, 0.0), DCovKind.V, n)


def dcov_u(x, y) -> DCovEstimate:
    """Unbiased (U-statistic) squared distance covariance from U-centered distance matrices. May be negative."""
    x, y = _as_sample_pair(x, y)
    n = x.shape[0]
    _require_u_sample(n)
    a = _u_centered(pairwise_dist(x))
    b = _u_centered(pairwise_dist(y))
    return DCovEstimate(float(np.sum(a * b)) / (n * (n - 3)), DCovKind.U, n)


def dcov_fast(x, y) -> DCovEstimate:
    """Unbiased squared distance covariance of two univariate samples in O(n log n)."""
    x, y = _as_sample_pair(x, y)
    n = x.shape[0]
    _require_u_sample(n)
    if x.tobytes() > y.tobytes():
        x, y = y, x  # fixed argument order makes the result exactly symmetric
    product_sum, row_product_sum, a_total, b_total = _dcov_terms(x, y)
    value = (
        product_sum / (n * (n - 3))
        - 2.0 * row_product_sum / (n * (n - 2) * (n - 3))
        + a_total * b_total / (n * (n - 1) * (n - 2) * (n - 3))
    )
    return DCovEstimate(value, DCovKind.FastU, n)


_ESTIMATORS: dict[DCovKind, tp.Callable[[tp.Any, tp.Any], DCovEstimate]] = {
    DCovKind.V: dcov_v2,
    DCovKind.U: dcov_u,
    DCovKind.FastU: dcov_fast,
}


def dcov(x, y, kind: DCovKind | str = DCovKind.FastU) -> DCovEstimate:
    """Dispatch to the estimator named by `kind`."""
    if isinstance(kind, str) and not isinstance(kind, DCovKind):
        kind = DCovKind.from_name(kind)
    return _ESTIMATORS[kind](x, y)


def feature_weights(estimates: tp.Sequence[DCovEstimate | float]) -> FeatureWeights:
    """Normalize per-feature estimates into probabilities.

    Negative (unbiased) estimates are clamped to zero first. If nothing positive remains, the weights fall back to
    uniform `1/d`.
    """
    values = np.array([float(e) for e in estimates], dtype=np.float64)
    if values.size == 0:
        raise InvalidWeightsError("Cannot build feature weights from zero estimates.")
    if not np.all(np.isfinite(values)):
        raise InvalidWeightsError(f"Distance covariance estimates must be finite: {values}")
    clamped = np.clip(values, 0.0, None)
    if clamped.max() <= WEIGHT_EPSILON:
        _LOGGER.warning(
            f"All {values.size} distance covariance estimates vanish (max {values.max():.3g}). Using uniform weights."
        )
        return FeatureWeights.uniform(values.size)
    return FeatureWeights(clamped / clamped.sum())


def estimate_feature_weights(
    features: np.ndarray,
    response: np.ndarray,
    kind: DCovKind | str = DCovKind.FastU,
) -> tuple[FeatureWeights, list[DCovEstimate]]:
    """Estimate `dCov(X_j, Y)` for every column of `features` and normalize into `FeatureWeights`."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatchError(f"Feature matrix must be 2D, not shape {features.shape}.")
    estimates = [dcov(features[:, j], response, kind) for j in range(features.shape[1])]
    weights = feature_weights(estimates)
    _LOGGER.debug(
        f"Estimated {kind} distance covariance weights on n = {features.shape[0]}: "
        f"max p = {weights.p.max():.4f} (feature {int(weights.p.argmax())})"
    )
    return weights, estimates
