"""Portable seeded randomness.

Lattice permutations and per-instance seeds use SplitMix64 (Steele, Lea &
Flood 2014): a 64-bit state advanced by the golden-ratio increment and
finalized by two xor-shift-multiply rounds. It is tiny, platform independent
and good enough for shuffles; nothing here needs cryptographic quality.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        return _mix(self.state)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle in place; returns ``items`` for chaining."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


def derive_seed(master: int, *counters: int) -> int:
    """Counter-based split: the seed for job ``counters`` under ``master``.

    Each counter is folded in with one SplitMix64 finalization, so the result
    depends only on (master, counters) and never on execution order.
    """
    z = master & MASK64
    for c in counters:
        z = _mix((z + _GOLDEN * ((c & MASK64) + 1)) & MASK64)
    return z
