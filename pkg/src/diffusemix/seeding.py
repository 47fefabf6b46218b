"""Deterministic seed derivation.

Python's hash() is salted per process, so substream seeds are derived with
SplitMix64: absorb each component by xor-then-avalanche. The same inputs
give the same stream on every platform and process.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    """One SplitMix64 avalanche step (64-bit)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix(seed: int, *parts: int) -> int:
    """Fold integer components into a single well-mixed 64-bit value."""
    state = splitmix64(seed & _MASK64)
    for part in parts:
        state = splitmix64(state ^ splitmix64(part & _MASK64))
    return state


def make_rng(state: int) -> np.random.Generator:
    """PCG64 generator seeded from a mixed 64-bit state."""
    return np.random.Generator(np.random.PCG64(state & _MASK64))
