"""Deterministic sampling used by every numerical check.

All sampled verifications (expression equality, bracket identities, rank
checks) draw their points from the same explicit generator so that a run is
reproducible from its seed alone, on any platform, with no hidden global
state.

The generator is Knuth's MMIX linear congruential generator: 64-bit state,
multiplier 6364136223846793005, increment 1442695040888963407.  Uniform
doubles take the top 53 bits of the state, so every value is an exact
multiple of 2**-53 in [0, 1).
"""

from __future__ import annotations

from typing import Mapping

_MULT = 6364136223846793005
_INC = 1442695040888963407
_MASK = (1 << 64) - 1

Box = Mapping[str, tuple[float, float]]


class Lcg:
    """Seeded 64-bit linear congruential generator."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state * _MULT + _INC) & _MASK
        return self._state

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = self.next_u64() >> 11  # top 53 bits
        return lo + (hi - lo) * (u * 2.0**-53)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]


def unit_box(names, lo: float = -1.0, hi: float = 1.0) -> dict[str, tuple[float, float]]:
    """Same interval for every variable."""
    return {name: (lo, hi) for name in names}


def sample_points(box: Box, n: int, seed: int, midpoint_first: bool = False) -> list[dict[str, float]]:
    """n points in the box, drawn variable-by-variable in sorted name order.

    With midpoint_first the first point is the box centre (used by rank
    checks so that symmetric degeneracies like a vanishing differential at
    the origin are hit deterministically).
    """
    if n < 1:
        raise ValueError("need at least one sample point")
    names = sorted(box)
    for name in names:
        lo, hi = box[name]
        if not lo < hi:
            raise ValueError(f"degenerate interval for '{name}': [{lo}, {hi}]")
    rng = Lcg(seed)
    points = []
    if midpoint_first:
        points.append({name: (box[name][0] + box[name][1]) / 2.0 for name in names})
    while len(points) < n:
        points.append({name: rng.uniform(*box[name]) for name in names})
    return points
