"""Seeded random streams.

Every stochastic step draws from a ``numpy.random.Generator`` built from a
``SeedSequence`` keyed by a 64-bit seed plus an integer path, so a stream is
a pure function of ``(seed, *path)`` and never depends on call order.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent PCG64 generator for ``(seed, *path)``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *path: int) -> int:
    """64-bit child seed for ``(seed, *path)``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
