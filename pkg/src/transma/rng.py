"""Named random substreams derived from a single run seed.

Each purpose ("mask", "noise", "kmeans", ...) gets its own counter-based
Philox stream keyed by ``(seed, purpose, *counters)``, so any one consumer can
be replayed in isolation.
"""

from __future__ import annotations

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def substream(seed: int, purpose: str, *counters: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF, purpose_key(purpose)]
    entropy.extend(int(c) & 0xFFFFFFFF for c in counters)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def text_counter(text: str) -> int:
    """Stable 32-bit counter for string keys such as molecule ids."""
    return zlib.crc32(text.encode("utf-8"))
