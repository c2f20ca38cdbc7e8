from __future__ import annotations

import numpy as np
import pytest

from dcovforest.exceptions import DimensionMismatchError, EmptyDataError, InsufficientSampleError
from dcovforest.kinds import Metric
from dcovforest.metrics import auc, mse, one_minus_auc, score


def test_mse():
    assert mse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert mse([0.0, 0.0], [1.0, 3.0]) == 5.0
    with pytest.raises(DimensionMismatchError):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(EmptyDataError):
        mse([], [])


def test_auc_two_by_two_scores():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert one_minus_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.25)


def test_auc_edge_cases():
    assert auc([0.1, 0.2, 0.9, 0.95], [0, 0, 1, 1]) == 1.0
    assert auc([0.9, 0.95, 0.1, 0.2], [0, 0, 1, 1]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    with pytest.raises(InsufficientSampleError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [0, 2])


def test_auc_is_antisymmetric_under_score_negation(rng):
    for _ in range(20):
        labels = np.array([0, 1] + rng.integers(0, 2, size=30).tolist())
        scores = rng.integers(0, 5, size=32).astype(float)  # ties
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


def test_auc_matches_pairwise_count(rng):
    labels = np.array([0, 1] + rng.integers(0, 2, size=40).tolist())
    scores = rng.integers(0, 6, size=42).astype(float)
    positives, negatives = scores[labels == 1], scores[labels == 0]
    wins = (positives[:, None] > negatives[None, :]).sum() + 0.5 * (positives[:, None] == negatives[None, :]).sum()
    assert auc(scores, labels) == pytest.approx(wins / (positives.size * negatives.size), abs=1e-12)


def test_score_dispatch():
    assert score("MSE", [0.0], [2.0]) == 4.0
    assert score(Metric.OneMinusAUC, [0.1, 0.9], [0, 1]) == 0.0
