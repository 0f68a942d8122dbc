"""Deterministic pseudo-randomness for every seeded step in the pipeline.

Everything that consumes randomness (fold shuffles, weight init, batch
order, dropout masks, synthetic fixtures) is driven by splitmix64 so that
a given seed produces the same artifacts on every platform.  The stdlib
``random`` module is deliberately not used anywhere seed-sensitive.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def splitmix64_finalize(z: int) -> int:
    """Output mixing of splitmix64 applied to a raw 64-bit state."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step: returns (value, next_state)."""
    state = (state + GOLDEN) & MASK64
    return splitmix64_finalize(state), state


def splitmix64_values(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized splitmix64: outputs ``offset+1 .. offset+count`` of the
    stream started at ``seed``, as a uint64 array.

    The stream is counter-based (state after n steps is seed + n*GOLDEN),
    so this is bit-identical to ``count`` sequential ``splitmix64_next``
    calls.
    """
    steps = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    z = (np.uint64(seed & MASK64) + steps * np.uint64(GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """``count`` doubles in [0, 1) built from the top 53 bits of each value."""
    vals = splitmix64_values(seed, count, offset)
    return (vals >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def mix64(*parts: int) -> int:
    """Fold integers into one 64-bit seed (for derived sub-streams)."""
    s = 0
    for p in parts:
        s = splitmix64_finalize(((s ^ (p & MASK64)) + GOLDEN) & MASK64)
    return s


class SplitMix64:
    """Stateful wrapper over the splitmix64 stream."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        value, self.state = splitmix64_next(self.state)
        return value

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def shuffled_indices(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of range(n) driven by splitmix64.

    Iterates i from n-1 down to 1 and swaps with j = value mod (i+1),
    drawing one stream value per step.
    """
    perm = list(range(n))
    state = seed & MASK64
    for i in range(n - 1, 0, -1):
        state = (state + GOLDEN) & MASK64
        z = ((state ^ (state >> 30)) * MIX1) & MASK64
        z = ((z ^ (z >> 27)) * MIX2) & MASK64
        j = (z ^ (z >> 31)) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm
