from __future__ import annotations

__all__ = [
    "mse",
    "auc",
    "one_minus_auc",
    "score",
]

import numpy as np
from scipy.stats import rankdata

from dcovforest.exceptions import DimensionMismatchError, EmptyDataError, InsufficientSampleError
from dcovforest.kinds import Metric


def _paired(a, b, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Got {a.shape[0]} {what} for {b.shape[0]} truth values.")
    if a.shape[0] == 0:
        raise EmptyDataError(f"Cannot score zero {what}.")
    return a, b


def mse(pred, truth) -> float:
    pred, truth = _paired(pred, truth, "predictions")
    return float(np.mean((pred - truth) ** 2))


def auc(scores, labels) -> float:
    """Probability that a random positive scores above a random negative, with ties counted as one half.

    Computed from mid-ranks (Mann-Whitney U), so it runs in O(n log n).
    """
    scores, labels = _paired(scores, labels, "scores")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("AUC labels must be 0 or 1.")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InsufficientSampleError("AUC needs both classes in the labels.")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def one_minus_auc(scores, labels) -> float:
    return 1.0 - auc(scores, labels)


def score(metric: Metric | str, pred, truth) -> float:
    """Evaluate `metric`; for `OneMinusAUC`, `pred` are scores and `truth` are 0/1 labels."""
    metric = Metric(metric)
    if metric == Metric.MSE:
        return mse(pred, truth)
    return one_minus_auc(pred, truth)
