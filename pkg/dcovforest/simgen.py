"""Synthetic source/target data for posterior-drift transfer experiments.

Features are i.i.d. `U(0, 1)` and noise is `Normal(0, noise_sd^2)`, both drawn from numpy's PCG64 generator seeded via
`SeedSequence` (see `dcovforest.rng`), so a `SimConfig` always yields the same datasets across runs and platforms.

The source function is `f_s(x) = sum_{i <= d/2} exp(-x_i) + sum_{i > d/2} tanh(x_i)`. The target function replaces the
`tanh` terms of the last `d - d0` features with `6 sin(2 pi x_i)`, where `d0 = d - floor(d * r)` for discrepancy ratio
`r`. The difference function is defined as `R(x) = f_t(x) - f_s(x) = sum_{i > d0} (6 sin(2 pi x_i) - tanh(x_i))`.
"""
from __future__ import annotations

__all__ = [
    "TARGET_FUNCTIONS",
    "SimConfig",
    "f_source",
    "f_target",
    "f1_dominant",
    "f2_flat",
    "f_sparse",
    "difference_function",
    "true_response",
    "gen_dataset",
    "export_csv",
]

import dataclasses
import math
import typing as tp
from pathlib import Path

import numpy as np
import pandas as pd

from dcovforest.dataset import Dataset, as_feature_matrix
from dcovforest.exceptions import ConfigError
from dcovforest.kinds import Domain
from dcovforest.rng import stream

_DOMAIN_KEYS = {Domain.Source: 0, Domain.Target: 1, Domain.Test: 2}

# Target and test regression functions: `drift` is `f_t` (`f1` with `d0` from `r`), `flat` is `f2`, and
# `sparse` is `f_sparse`.
TARGET_FUNCTIONS = frozenset({"drift", "flat", "sparse"})


@dataclasses.dataclass(slots=True, frozen=True)
class SimConfig:
    n_s: int = 5000
    n_t: int = 400
    n_test: int = 200
    d: int = 20
    r: float = 0.1
    noise_sd: float = 1.0
    seed: int = 0
    target_fn: str = "drift"  # one of `TARGET_FUNCTIONS`

    def __post_init__(self):
        if self.d < 2 or self.d % 2:
            raise ConfigError(f"Simulation feature count `d` must be even and at least 2, not: {self.d}")
        if not 0.0 <= self.r <= 0.5:
            raise ConfigError(f"Discrepancy ratio `r` must be in [0, 0.5], not: {self.r}")
        if self.target_fn not in TARGET_FUNCTIONS:
            raise ConfigError(
                f"Simulation `target_fn` must be one of {sorted(TARGET_FUNCTIONS)}, not: {self.target_fn!r}"
            )
        if self.noise_sd < 0:
            raise ConfigError(f"Noise standard deviation must be non-negative, not: {self.noise_sd}")
        for name in ("n_s", "n_t", "n_test"):
            if getattr(self, name) < 0:
                raise ConfigError(f"Sample size `{name}` must be non-negative, not: {getattr(self, name)}")

    @property
    def d0(self) -> int:
        """Last index (1-based) whose target association matches the source."""
        return self.d - math.floor(self.d * self.r)

    @property
    def difference_features(self) -> np.ndarray:
        """Zero-based indices of the features the difference function depends on."""
        return np.arange(self.d0, self.d)

    @property
    def shared_features(self) -> np.ndarray:
        return np.arange(self.d0)

    def replace(self, **changes) -> tp.Self:
        return dataclasses.replace(self, **changes)

    def size(self, domain: Domain) -> int:
        return {Domain.Source: self.n_s, Domain.Target: self.n_t, Domain.Test: self.n_test}[domain]


def _check_even(d: int):
    if d % 2:
        raise ValueError(f"Generator functions need an even feature count, not: {d}")


def _check_d0(d: int, d0: int):
    if not d // 2 <= d0 <= d:
        raise ValueError(f"`d0` must be between d/2 = {d // 2} and d = {d}, not: {d0}")


def _rows(x) -> tuple[np.ndarray, bool]:
    """Return a 2D view and whether the input was a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x.reshape(1, -1), True
    return x, False


def _finish(values: np.ndarray, single: bool) -> float | np.ndarray:
    return float(values[0]) if single else values


def f1_dominant(x, d0: int) -> float | np.ndarray:
    """`sum_{i <= d/2} exp(-x_i) + sum_{d/2 < i <= d0} tanh(x_i) + sum_{i > d0} 6 sin(2 pi x_i)`."""
    rows, single = _rows(x)
    d = rows.shape[1]
    _check_even(d)
    _check_d0(d, d0)
    half = d // 2
    values = (
        np.exp(-rows[:, :half]).sum(axis=1)
        + np.tanh(rows[:, half:d0]).sum(axis=1)
        + 6.0 * np.sin(2.0 * np.pi * rows[:, d0:]).sum(axis=1)
    )
    return _finish(values, single)


def f2_flat(x) -> float | np.ndarray:
    """`sum_{i <= d/2} exp(-x_i) + sum_{i > d/2} tanh(x_i)`: no dominant features."""
    rows, single = _rows(x)
    d = rows.shape[1]
    _check_even(d)
    half = d // 2
    values = np.exp(-rows[:, :half]).sum(axis=1) + np.tanh(rows[:, half:]).sum(axis=1)
    return _finish(values, single)


def f_source(x) -> float | np.ndarray:
    return f2_flat(x)


def f_target(x, d0: int) -> float | np.ndarray:
    return f1_dominant(x, d0)


def difference_function(x, d0: int) -> float | np.ndarray:
    """`R = f_t - f_s`, which depends only on features after `d0`."""
    rows, single = _rows(x)
    _check_even(rows.shape[1])
    _check_d0(rows.shape[1], d0)
    tail = rows[:, d0:]
    values = (6.0 * np.sin(2.0 * np.pi * tail) - np.tanh(tail)).sum(axis=1)
    return _finish(values, single)


def f_sparse(x) -> float | np.ndarray:
    """`sum_{i <= d/4} exp(-x_i) + sum_{d/4 < i <= d/2} tanh(x_i)`; the second half of the features is irrelevant."""
    rows, single = _rows(x)
    d = rows.shape[1]
    _check_even(d)
    quarter, half = d // 4, d // 2
    values = np.exp(-rows[:, :quarter]).sum(axis=1) + np.tanh(rows[:, quarter:half]).sum(axis=1)
    return _finish(values, single)


def true_response(config: SimConfig, domain: Domain | str, features) -> np.ndarray:
    """Noise-free regression function of `domain` at the rows of `features`."""
    domain = Domain(domain)
    features = np.asarray(features, dtype=np.float64).reshape(-1, config.d)
    if domain == Domain.Source:
        return f_source(features)
    match config.target_fn:
        case "sparse":
            return f_sparse(features)
        case "flat":
            return f2_flat(features)
    return f_target(features, config.d0)


def gen_dataset(config: SimConfig, domain: Domain | str) -> Dataset:
    """Draw the `domain` sample of `config`: `X ~ U(0,1)^d`, `Y = f(X) + noise` with `f_s` for the source domain and
    `f_t` for the target and test domains. Each domain has its own stream, so changing `n_t` leaves the source sample
    untouched."""
    domain = Domain(domain)
    n = config.size(domain)
    rng = stream(config.seed, _DOMAIN_KEYS[domain])
    features = rng.uniform(0.0, 1.0, size=(n, config.d))
    noise = rng.normal(0.0, config.noise_sd, size=n) if config.noise_sd > 0 else np.zeros(n)
    return Dataset(features, true_response(config, domain, features) + noise)


def export_csv(data: Dataset, path: str | Path, response_name: str = "y", extra_columns: dict | None = None) -> Path:
    """Write `data` as a harness CSV: one column per feature (`x0`, `x1`, ...) followed by the response column."""
    path = Path(path)
    frame = pd.DataFrame(as_feature_matrix(data.features), columns=data.column_names())
    for name, values in (extra_columns or {}).items():
        frame[name] = values
    frame[response_name] = data.response
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
