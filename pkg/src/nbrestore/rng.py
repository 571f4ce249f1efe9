"""Seedable random streams.

Every stochastic operation in the toolkit draws from a Philox4x64 counter-based
generator keyed by (seed, tag words).  Philox output is specified by the
algorithm itself, not by platform word size or C library, so identical keys
reproduce identical streams on any machine.  Tags keep the streams for
different operators / sample indices independent even when they share a seed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Fixed per-operator tag words (never renumber: they are baked into datasets).
TAG_AWGN = 0x01
TAG_SALT_PEPPER = 0x02
TAG_SAMPLE = 0x10
TAG_SPLIT = 0x11
TAG_EVAL = 0x20


def splitmix64(x: int) -> int:
    """One round of the splitmix64 mixer; a cheap stable integer hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def mix(*words: int) -> int:
    """Fold any number of integers into one 64-bit word, order-sensitively."""
    acc = 0
    for w in words:
        acc = splitmix64(acc ^ (int(w) & _MASK64))
    return acc


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for (seed, tags).

    The 128-bit Philox key is (seed, mix(tags)); differing tags give
    statistically independent streams under the same user seed.
    """
    key = ((int(seed) & _MASK64) << 64) | mix(*tags)
    return np.random.Generator(np.random.Philox(key=key))
