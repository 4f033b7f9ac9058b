"""Deterministic pseudo-random stream used for sampling.

The generator is SplitMix64 (Steele, Lea & Flood's fixed-increment variant),
chosen because its stream is trivial to reimplement bit-for-bit in any
language: a 64-bit counter advanced by the golden-gamma constant, hashed
through two xor-multiply rounds. One `uniform()` call consumes exactly one
64-bit output and maps its top 53 bits onto [0, 1).

The `draws` counter makes RNG-budget assertions cheap: engine contracts
promise an exact number of uniform draws per step.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state", "draws")

    def __init__(self, seed: int):
        self.state = seed & _MASK64
        self.draws = 0

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One draw from [0, 1), 53 bits of precision."""
        self.draws += 1
        return (self.next_u64() >> 11) * 2.0**-53

    def __repr__(self) -> str:
        return f"SplitMix64(state={self.state:#018x}, draws={self.draws})"
