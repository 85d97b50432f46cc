"""Seeded random streams.

Every stream is a Philox counter-based generator keyed by a root seed plus a
tuple of integers naming the stream (row index, trial index, ...). Two streams
with different keys are statistically independent and a stream's output does
not depend on which other streams were drawn before it, so work can be split
across workers in any way without changing results.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, for APIs that take a plain integer."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
