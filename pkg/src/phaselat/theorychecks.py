"""Arithmetic progressions in index subsets and finite differences.

Small executable counterparts of the counting and difference identities the
consistency argument relies on.  Everything here is brute force on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

__all__ = [
    "IndexSubset",
    "count_progressions",
    "progression_lower_bound",
    "finite_difference",
]


@dataclass(frozen=True)
class IndexSubset:
    """A subset ``members`` of ``{1, ..., universe_size}``."""

    universe_size: int
    members: tuple

    def __post_init__(self):
        mem = tuple(sorted(set(int(x) for x in self.members)))
        if mem and (mem[0] < 1 or mem[-1] > self.universe_size):
            raise ValueError("members must lie in 1..universe_size")
        object.__setattr__(self, "members", mem)

    @classmethod
    def full(cls, N: int) -> "IndexSubset":
        return cls(N, tuple(range(1, N + 1)))

    def __len__(self):
        return len(self.members)

    def without(self, r: int) -> "IndexSubset":
        return IndexSubset(self.universe_size, tuple(x for x in self.members if x != r))


def count_progressions(subset: IndexSubset, h: int, m: int) -> int:
    """Number of ``n`` with ``n, n+h, ..., n+mh`` all in the subset."""
    if h < 1 or m < 0:
        raise ValueError("need h >= 1 and m >= 0")
    s = set(subset.members)
    return sum(1 for n in subset.members if all(n + i * h in s for i in range(1, m + 1)))


def progression_lower_bound(N: int, size: int, h: int, m: int) -> int:
    """``N - m h - (N - |K|)(m + 1)``."""
    return N - m * h - (N - size) * (m + 1)


def finite_difference(values, h: int, r: int, n0: int, offset: int = 0):
    """``r``-th difference with step ``h`` at ``n0``.

    ``values[i]`` holds the sequence at index ``i + offset``.  Works on any
    numeric type; integer or ``Fraction`` sequences give exact results.
    """
    idx = [n0 + k * h - offset for k in range(r + 1)]
    if r < 0 or min(idx) < 0 or max(idx) >= len(values):
        raise IndexError(f"difference of order {r} with step {h} at {n0} leaves the sequence")
    return sum(comb(r, k) * (-1) ** (r - k) * values[i] for k, i in enumerate(idx))
