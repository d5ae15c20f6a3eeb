"""
A small, stable random source for seeded splits.

Python's ``random`` module does not promise identical streams across
versions, so splits use their own generator: SplitMix64.

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2^64
    out <- z ^ (z >> 31)

Bounded draws reject values at or above the largest multiple of the bound
below 2^64, then reduce modulo the bound. ``shuffle`` is Fisher-Yates from
the last position down: for i = n-1 .. 1, swap i with below(i + 1).
"""
from typing import Callable, Optional, Sequence

import validation

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 generator; the seed is taken modulo 2^64."""

    def __init__(self, seed: int):
        validation.validate_integer(seed, 'seed')
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound <= 0:
            raise ValueError('bound must be positive')
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound


def shuffle_in_place(values: list, rng: SplitMix64) -> None:
    for i in range(len(values) - 1, 0, -1):
        j = rng.below(i + 1)
        values[i], values[j] = values[j], values[i]


def shuffle(values: Sequence, seed: int,
            key: Optional[Callable] = None) -> list:
    """
    A new list holding ``values`` sorted by ``key`` (when given) and then
    shuffled by a generator seeded with ``seed``. Sorting first makes the
    result independent of the input order.
    """
    out = sorted(values, key=key) if key is not None else list(values)
    shuffle_in_place(out, SplitMix64(seed))
    return out
