"""Named, reproducible random streams.

Every stochastic component derives its own generator from a master seed plus a
stream name, so reordering or parallelizing one consumer never perturbs the
draws seen by another.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_rng(seed: int, *stream: str | int) -> np.random.Generator:
    """Return a Generator for the given (seed, stream...) coordinates.

    String components are hashed with crc32, which is stable across runs,
    platforms and Python versions (unlike ``hash``).
    """
    keys = [int(seed) & 0xFFFFFFFF]
    for part in stream:
        if isinstance(part, str):
            keys.append(zlib.crc32(part.encode("utf-8")))
        else:
            keys.append(int(part) & 0xFFFFFFFF)
    return np.random.default_rng(keys)
