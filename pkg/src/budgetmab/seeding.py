"""Deterministic, independent random streams keyed by experiment coordinates.

Streams come from a counter-based generator (Philox) whose key is derived
from ``(master_seed, *coordinates)`` through numpy's ``SeedSequence``.  Any
two distinct coordinate tuples give statistically independent streams, and
the same tuple always gives the same stream, whatever order the work runs in.
"""

from __future__ import annotations

import zlib

import numpy as np

ROLE_INSTANCE = 0
ROLE_OUTCOMES = 1
ROLE_DECISIONS = 2
ROLE_CALIBRATION = 3


def stream(master_seed: int, *coords: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(c) for c in coords))
    return np.random.Generator(np.random.Philox(seq))


def label_key(label: str) -> int:
    """Stable integer key for a policy label (independent of list position)."""
    return zlib.crc32(label.encode("utf-8"))
