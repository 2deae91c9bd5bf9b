"""Seeded generator construction.

Every stochastic operation takes an explicit integer seed and builds its own
Philox (counter-based) generator, so nothing depends on global state.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *tags: int) -> np.random.Generator:
    """Return a Philox generator for ``seed``, optionally split by integer tags."""
    if tags:
        ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *(int(t) for t in tags)])
    else:
        ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed, used to hand independent streams to sub-steps."""
    return int(make_rng(seed, *tags).integers(0, 2**31 - 1))


def open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform draws strictly inside (0, 1); safe for inverse-CDF sampling."""
    u = rng.random(size)
    # random() is [0, 1); only the exact zero needs nudging
    return np.where(u == 0.0, 2.0**-54, u)
