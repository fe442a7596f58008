"""Deterministic, named random substreams.

Every stochastic quantity in a campaign is drawn from a counter-based
stream addressed by a key tuple such as ``(seed, "chan", point, batch, i, j)``.
Streams derived this way are independent of evaluation order and of how
work is split across threads, which is what makes reruns byte-identical.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"stream keys must be ints or strings, got {type(key).__name__}")


def substream(*keys) -> np.random.Generator:
    """Generator for the substream addressed by ``keys``.

    The same key tuple always yields the same stream; distinct tuples give
    statistically independent streams (Philox keyed via SeedSequence).
    """
    entropy = [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
