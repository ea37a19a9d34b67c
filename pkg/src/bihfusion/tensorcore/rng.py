"""Seeded, splittable random streams.

Every stream is a Philox generator derived from ``(seed, *keys)`` so that
model components and training epochs draw from independent, reproducible
sequences regardless of the order in which they are created.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def make_rng(seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
