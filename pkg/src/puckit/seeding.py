"""Seed handling.

Every random draw in the toolkit comes from numpy's PCG64 bit generator.
A single top-level integer seed is expanded into per-component seeds with
``numpy.random.SeedSequence``: the child seed for a path ``(a, b, ...)`` is
``SeedSequence(seed, spawn_key=(a, b, ...)).generate_state(1, uint64)[0]``
masked to 63 bits.  The same path always yields the same child seed.
"""

from __future__ import annotations

import numpy as np

# Component keys used when expanding a run seed.
SPLIT = 0
F_MODEL = 1
G_MODEL = 2
HEAD = 3
SOURCE = 4
FOLDS = 5

_MASK = (1 << 63) - 1


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for ``path`` under the top-level ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & _MASK


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))
