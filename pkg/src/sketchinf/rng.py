"""Reproducible random streams.

All randomness flows through Philox4x64 (counter-based) bit generators keyed
by a :class:`numpy.random.SeedSequence`. A stream is addressed by a master
seed plus a tuple of integers, so e.g. the sign flips and the row selection
of one SRHT draw come from independent named substreams and do not depend on
the order in which they are consumed.
"""

from __future__ import annotations

import zlib
from typing import Iterable

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_key(parts: Iterable) -> tuple[int, ...]:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        else:
            out.append(int(p) & _MASK64)
    return tuple(out)


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    if seed is None:
        raise ValueError("a seed is required for every randomized path")
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=_as_key(path))


def stream(seed: int, *path) -> np.random.Generator:
    """Philox generator for the substream ``path`` of ``seed``.

    ``path`` entries may be ints or strings (strings are hashed with CRC32).
    """
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *path)))


def child_seed(seed: int, *path) -> int:
    """Derive a 64-bit seed for a sub-experiment, e.g. one Monte Carlo trial."""
    words = seed_sequence(seed, *path).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)
