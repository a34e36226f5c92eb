"""Deterministic random streams.

All randomness in the pipeline flows from a single root seed through named
substreams backed by the Philox counter-based generator.  A substream is
addressed by a path of names and integers, e.g. ``substream(seed, "draw", 3)``
for the draw inside bin 3, so independent stages (and parallel workers) never
consume each other's stream and any stage can be re-run in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag(part) -> int:
    """Stable 64-bit encoding of one path component."""
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *path) -> np.random.Generator:
    """Return the Philox generator for the substream named by ``path``.

    The same (seed, path) always yields an identical stream; distinct paths
    yield statistically independent streams.
    """
    entropy = [int(seed) & _MASK64] + [_tag(p) for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
