"""Deterministic pseudo-random stream used everywhere randomness is needed.

SplitMix64 is small enough to port by hand to any language, which keeps
generated corpora bit-identical across implementations. Do not swap in a
platform RNG here: record-level reproducibility depends on this exact
sequence.
"""

from __future__ import annotations

_MASK64 = 2**64 - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix(seed: int) -> int:
    """One SplitMix64 output for a raw seed; used to derive per-record seeds."""
    return Rng(seed).next_u64()


class Rng:
    """SplitMix64 stream over 64-bit state."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_fraction(self) -> float:
        # Top 53 bits so the conversion to binary64 is exact, giving the
        # same float in any language with IEEE doubles.
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n). Requires n >= 1."""
        if n < 1:
            raise ValueError(f"below() needs n >= 1, got {n}")
        return self.next_u64() % n
