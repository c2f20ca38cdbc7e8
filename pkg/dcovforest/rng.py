"""Deterministic random streams.

Every random decision in the package is drawn from a `numpy.random.Generator` whose `SeedSequence` is built from the
user seed plus a structured spawn key (e.g. `(seed, tree_index)`), so any stream can be recreated on its own, in any
order and in any worker. Streams use numpy's default bit generator (PCG64), which is stable across numpy releases.
"""
from __future__ import annotations

__all__ = [
    "stream",
    "derive_seed",
]

import numpy as np


def _seed_sequence(seed: int, keys: tuple[int, ...]) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, not: {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in keys))


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for `(seed, *keys)`."""
    return np.random.default_rng(_seed_sequence(seed, keys))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a child integer seed for `(seed, *keys)`, for handing to functions that take a seed."""
    return int(_seed_sequence(seed, keys).generate_state(1, dtype=np.uint32)[0])
