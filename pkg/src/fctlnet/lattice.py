"""Emptiness patterns of the green period.

``G[j, l]`` holds every arrival vector (n_1, ..., n_j) that, starting from a
queue of ``l`` vehicles at the cycle start, keeps the queue positive through
slots 0..j-1 and empties it exactly at the end of slot j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def indicator_T(x0: int, ns=()) -> int:
    """1 if the running level x0 + n_1 + ... + n_m - m hits <= 0 for some m <= k."""
    level = x0
    if level <= 0:
        return 1
    for n in ns:
        level += n - 1
        if level <= 0:
            return 1
    return 0


def _paths(level: int, remaining: int):
    # level > 0 is the queue after the previous slot; remaining slots to reach 0
    if remaining == 1:
        if level == 1:
            yield (0,)
        return
    # stay positive now and still able to reach zero in the slots left
    lo = max(0, 2 - level)
    hi = remaining - level
    for n in range(lo, hi + 1):
        for rest in _paths(level + n - 1, remaining - 1):
            yield (n,) + rest


@dataclass(frozen=True)
class GTable:
    g: int
    sets: dict = field(repr=False)

    def __getitem__(self, key):
        return self.sets.get(key, ())

    def nonempty(self):
        """(j, l) keys with at least one vector, in (l, j) order."""
        return [k for k in sorted(self.sets, key=lambda jl: (jl[1], jl[0])) if self.sets[k]]

    def arrays(self):
        """{(j, l): int array of shape (count, j)} for vectorized evaluation."""
        return {k: np.array(v, dtype=np.int64).reshape(len(v), k[0]) for k, v in self.sets.items() if v}

    @property
    def size(self) -> int:
        return sum(len(v) for v in self.sets.values())


def enumerate_G(g: int) -> GTable:
    """All emptiness patterns for a green period of ``g`` slots (0 <= l <= j <= g-1)."""
    if g < 1:
        raise ValueError("green length must be at least 1")
    sets = {(0, 0): ((),)}
    for l in range(1, g):
        for j in range(l, g):
            sets[(j, l)] = tuple(_paths(l, j))
    return GTable(g, sets)
