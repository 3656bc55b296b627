"""Reproducible random streams.

Every consumer of randomness takes an explicit :class:`numpy.random.Generator`.
Independent substreams are derived from a master seed and an integer key path,
so record ``i`` of a dataset gets the same draws no matter how many workers
generate the dataset or in which order.
"""
from __future__ import annotations

import numpy as np

RandomStream = np.random.Generator

# Fixed spawn-key prefixes so that substreams for different purposes never collide.
PAIRS = 1
RECORDS = 2
SPLIT = 3
TRAIN = 4
NULL = 5
EVAL = 6


def substream(seed: int, *key: int) -> RandomStream:
    """Counter-based generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_stream(rng: RandomStream | int | None) -> RandomStream:
    if isinstance(rng, np.random.Generator):
        return rng
    return substream(0 if rng is None else rng)


def child_seed(rng: RandomStream) -> int:
    """Draw a 63-bit seed from ``rng`` for handing to a derived stream."""
    return int(rng.integers(0, 2**63 - 1))
