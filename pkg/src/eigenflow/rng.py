"""
Seeded random streams.

A run seed spawns one independent stream per ``(purpose, index)`` pair. The
purpose string is hashed with CRC-32 and used together with the index as the
``spawn_key`` of a :class:`numpy.random.SeedSequence`; the bit generator is
the counter-based Philox. A stream therefore depends only on
``(seed, purpose, index)``, never on scheduling or worker count.
"""
import zlib

import numpy as np

__all__ = ["substream"]


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, index)``."""
    key = (zlib.crc32(purpose.encode("utf-8")), int(index))
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
