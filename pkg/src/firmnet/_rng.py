"""Named, reproducible random streams.

Every consumer of randomness asks for a stream by name. Streams are Philox
(counter-based) generators keyed by ``(seed, name)``, so the draws a module
sees do not depend on what other modules consumed before it.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Return an independent generator for ``seed`` and a path of names."""
    key = tuple(n if isinstance(n, int) else zlib.crc32(n.encode()) for n in names)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
