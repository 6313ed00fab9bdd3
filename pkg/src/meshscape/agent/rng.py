"""Deterministic 64-bit-state PRNG for simulated resource dynamics.

Algorithm: splitmix64 (Steele, Lea & Flood's SplittableRandom finalizer).
Chosen because the whole generator state is a single 64-bit word, so a
(seed, tick) pair fully determines every simulated sample on any platform.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * (self.next_u64() / 2.0**64)
