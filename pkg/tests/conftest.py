from __future__ import annotations

import numpy as np
import pytest

from dcovforest.dataset import Dataset
from dcovforest.simgen import SimConfig, gen_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run Monte-Carlo acceptance checks.")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def toy_1d() -> Dataset:
    """Three 1-feature training points: two in `[0, 0.5)`, one in `[0.5, 1]`."""
    return Dataset(np.array([[0.1], [0.2], [0.9]]), np.array([1.0, 3.0, 5.0]))


@pytest.fixture
def small_sim() -> SimConfig:
    return SimConfig(n_s=300, n_t=80, n_test=50, d=6, r=0.2, noise_sd=0.5, seed=7)


@pytest.fixture
def small_source(small_sim) -> Dataset:
    return gen_dataset(small_sim, "source")


@pytest.fixture
def small_target(small_sim) -> Dataset:
    return gen_dataset(small_sim, "target")
