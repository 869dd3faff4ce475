"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which uses
numpy's Philox4x64 counter-based generator. Philox output depends only on the
key and counter, so a given seed yields the same stream on every platform.
"""

from __future__ import annotations

import zlib

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(*parts) -> int:
    """Deterministically mix integers, floats and string labels into a 63-bit seed."""
    words = []
    for p in parts:
        if isinstance(p, str):
            p = zlib.crc32(p.encode())
        elif isinstance(p, float):
            # rho values are grid points; 1e-9 resolution is plenty
            p = int(round(p * 1e9))
        words.append(int(p) & 0xFFFFFFFF)
        words.append((int(p) >> 32) & 0xFFFFFFFF)
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
