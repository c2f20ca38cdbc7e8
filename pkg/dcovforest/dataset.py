from __future__ import annotations

__all__ = [
    "Dataset",
    "as_feature_matrix",
]

import dataclasses
import typing as tp

import numpy as np

from dcovforest.exceptions import DimensionMismatchError, EmptyDataError


def as_feature_matrix(x: tp.Any, d: int | None = None) -> np.ndarray:
    """Coerce `x` to a column-major float64 matrix of shape `(n, d)`. A single 1D point is treated as one row when `d`
    is given and matches its length."""
    features = np.asarray(x, dtype=np.float64)
    if features.ndim == 1:
        if d is not None and features.shape[0] == d:
            features = features.reshape(1, d)
        else:
            features = features.reshape(-1, 1)
    if features.ndim != 2:
        raise DimensionMismatchError(f"Feature matrix must be 2D, not shape {features.shape}.")
    if d is not None and features.shape[1] != d:
        raise DimensionMismatchError(f"Feature matrix has {features.shape[1]} columns, expected {d}.")
    return np.asfortranarray(features)


@dataclasses.dataclass(slots=True, frozen=True)
class Dataset:
    """Paired feature matrix (column-major) and response vector. Centered forests also need features in [0, 1]."""

    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        features = as_feature_matrix(self.features)
        response = np.ascontiguousarray(self.response, dtype=np.float64).ravel()
        if features.shape[0] != response.shape[0]:
            raise DimensionMismatchError(
                f"Feature matrix has {features.shape[0]} rows but response has {response.shape[0]} values."
            )
        if self.feature_names is not None and len(self.feature_names) != features.shape[1]:
            raise DimensionMismatchError(
                f"Got {len(self.feature_names)} feature names for {features.shape[1]} features."
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "response", response)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, indices: tp.Sequence[int] | np.ndarray) -> tp.Self:
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[indices], self.response[indices], self.feature_names)

    def require_nonempty(self, what: str = "training set"):
        if self.n == 0:
            raise EmptyDataError(f"Cannot fit on an empty {what}.")

    def column_names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j}" for j in range(self.d)]
