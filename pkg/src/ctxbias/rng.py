"""Seeded random number generation for reproducible list sampling.

The generator is splitmix64: 64-bit state, state advances by the golden-gamma
constant and the output is a mixed copy of the state. It is tiny, fully
specified below, and produces the same stream on any platform, which is what
makes sampled biasing lists portable across implementations.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """One splitmix64 output mix of a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """splitmix64 stream.

    next_u64: state += 0x9E3779B97F4A7C15; return mix64(state).
    randbelow(n): next_u64() % n.
    uniform(): top 53 bits of next_u64() scaled by 2**-53.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return mix64(self.state)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        return self.next_u64() % n

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        return lo + self.randbelow(hi - lo + 1)

    def sample(self, pool: list, k: int) -> list:
        """k items without replacement via partial Fisher-Yates on a copy."""
        if k > len(pool):
            raise ValueError("sample larger than population")
        items = list(pool)
        for i in range(k):
            j = i + self.randbelow(len(items) - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]


def utterance_seed(global_seed: int, utt_id: str) -> int:
    """Per-utterance seed: FNV-1a(64) over the UTF-8 id, xor the global seed,
    then one mix64 round."""
    h = _FNV_OFFSET
    for b in utt_id.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return mix64(h ^ (global_seed & _MASK64))
