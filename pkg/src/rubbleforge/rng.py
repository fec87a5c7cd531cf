"""Seeded 64-bit PRNG (splitmix64) used everywhere randomness is needed.

A fixed, documented generator keeps fragment layouts reproducible across
machines and makes the streams easy to match from other languages.
"""
from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer: a single avalanche step on a 64-bit value."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class SplitMix64:
    """splitmix64 stream generator."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return mix64(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform float in [lo, hi) with 53 bits of entropy."""
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u * 2.0**-53)

    def spawn(self) -> "SplitMix64":
        """Independent child stream, deterministic from the parent state."""
        return SplitMix64(self.next_u64())


def derive_seed(base: int, *parts: int) -> int:
    """Pure function mixing integer tags into a base seed.

    Used to give every room/solid its own stream from the scene's global
    seed: same (base, parts) always yields the same seed.
    """
    v = base & _MASK
    for p in parts:
        v = mix64(v ^ mix64(p & _MASK))
    return v
