"""Departure process of a solved queue over its green slots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrivals import ONE_SLOT, ArrivalProcess, Scenario, compact, joint_pgf, mean_per_slot
from .solver import QueueSolution

NEG_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class OutputProcess:
    """Joint law of the departures (O_1, ..., O_g) in one cycle.

    ``process`` reuses the arrival-process representation with cycle length g:
    each component is "j forced departures, then the arrivals pass through".
    """

    green_length: int
    process: ArrivalProcess
    green_dist: np.ndarray

    @property
    def g(self) -> int:
        return self.green_length

    def pgf(self, z) -> complex:
        return joint_pgf(self.process, z)


def effective_green_dist(sol: QueueSolution) -> np.ndarray:
    """P(G = j), j = 0..g, where G is the number of green slots until the queue first empties."""
    return sol.effective_green.copy()


def output_pgf(sol: QueueSolution, eps_weight: float = 0.0) -> OutputProcess:
    """Mixture form of the joint output pgf, one component per (effective green, scenario)."""
    g = sol.g
    arr = sol.arrivals
    items = []
    for j in range(g):
        for s_idx, s in enumerate(arr.scenarios):
            w = sol.coeff[j, s_idx]
            if w > 0:
                items.append(Scenario(w, (ONE_SLOT,) * j + s.slots[j:g]))
    saturated = 1.0 - float(sol.coeff.sum())
    if saturated < -NEG_WEIGHT_TOL:
        raise ValueError(f"effective-green mass exceeds one by {-saturated:.3e}")
    if saturated > 0:
        items.append(Scenario(saturated, (ONE_SLOT,) * g))
    raw = ArrivalProcess.__new__(ArrivalProcess)
    object.__setattr__(raw, "cycle_length", g)
    object.__setattr__(raw, "scenarios", tuple(items))
    return OutputProcess(g, compact(raw, eps_weight), effective_green_dist(sol))


def output_mean_per_slot(o: OutputProcess) -> np.ndarray:
    return mean_per_slot(o.process)


def independent_output_pgf(green_dist, slot_pgfs, z) -> complex:
    """Joint output pgf for independent input slots, written out term by term.

    ``slot_pgfs[i]`` is the pgf of Y_{i+1}; used as an oracle for :func:`output_pgf`.
    """
    g = len(green_dist) - 1
    z = np.asarray(z, dtype=complex)
    ys = np.array([slot_pgfs[i](z[i]) for i in range(g)])
    total = green_dist[0] * np.prod(ys)
    for j in range(1, g):
        total += green_dist[j] * np.prod(z[:j]) * np.prod(ys[j:])
    total += green_dist[g] * np.prod(z)
    return complex(total)
