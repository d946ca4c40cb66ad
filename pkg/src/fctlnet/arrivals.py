"""Cyclic arrival processes with within-cycle correlation.

An arrival process is a finite mixture of *scenarios*. Each cycle one scenario
is drawn by weight; given the scenario the per-slot counts are independent,
each slot being a fixed shift plus a Poisson count. Every input and every
departure process handled by this package has that shape, and the class is
closed under superposition and re-indexing of slots.

Rates are kept as :class:`fractions.Fraction` so that scenario merging is an
exact comparison rather than a floating-point one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

WEIGHT_TOL = 1e-12


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("rate must be numeric")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # shortest repr keeps "0.45" as 9/20 instead of the binary expansion
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {value!r} to a rate")


@dataclass(frozen=True)
class SlotDistribution:
    """Arrivals in one slot: ``shift`` vehicles plus a Poisson(``rate``) count."""

    shift: int = 0
    rate: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "rate", as_fraction(self.rate))
        if int(self.shift) != self.shift or self.shift < 0:
            raise ValueError(f"shift must be a nonnegative integer, got {self.shift!r}")
        object.__setattr__(self, "shift", int(self.shift))
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")

    @property
    def mean(self) -> float:
        return self.shift + float(self.rate)

    @property
    def variance(self) -> float:
        return float(self.rate)

    def pgf(self, z):
        return slot_pgf(self, z)

    def pmf(self, n: int) -> float:
        return slot_pmf(self, n)

    def __add__(self, other: "SlotDistribution") -> "SlotDistribution":
        return SlotDistribution(self.shift + other.shift, self.rate + other.rate)

    def __str__(self):
        if self.rate == 0:
            return f"Det({self.shift})"
        if self.shift == 0:
            return f"Poi({self.rate})"
        return f"{self.shift}+Poi({self.rate})"


ZERO_SLOT = SlotDistribution(0, Fraction(0))
ONE_SLOT = SlotDistribution(1, Fraction(0))


@dataclass(frozen=True)
class Scenario:
    weight: float
    slots: tuple

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        object.__setattr__(self, "weight", float(self.weight))
        if not self.weight > 0:
            raise ValueError(f"scenario weight must be positive, got {self.weight}")

    @property
    def key(self) -> tuple:
        return tuple((s.shift, s.rate) for s in self.slots)


@dataclass(frozen=True)
class ArrivalProcess:
    """Mixture of slot-independent scenarios over a cycle of ``cycle_length`` slots.

    Consecutive cycles are independent: the scenario is redrawn every cycle.
    """

    cycle_length: int
    scenarios: tuple

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        c = self.cycle_length
        if c < 1:
            raise ValueError("cycle length must be at least 1")
        if not self.scenarios:
            raise ValueError("an arrival process needs at least one scenario")
        for s in self.scenarios:
            if len(s.slots) != c:
                raise ValueError(f"scenario has {len(s.slots)} slots, expected {c}")
        total = math.fsum(s.weight for s in self.scenarios)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"scenario weights sum to {total!r}, not 1")

    @classmethod
    def from_weighted(cls, cycle_length: int, items: Iterable, normalize: bool = False):
        """Build from ``(weight, slots)`` pairs, optionally rescaling weights to sum 1."""
        items = [(float(w), tuple(slots)) for w, slots in items]
        if normalize:
            total = math.fsum(w for w, _ in items)
            items = [(w / total, slots) for w, slots in items]
        return cls(cycle_length, tuple(Scenario(w, s) for w, s in items))

    @property
    def c(self) -> int:
        return self.cycle_length

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([s.weight for s in self.scenarios], dtype=float)

    @cached_property
    def shifts(self) -> np.ndarray:
        """Integer array of shape (scenarios, c)."""
        return np.array([[d.shift for d in s.slots] for s in self.scenarios], dtype=np.int64)

    @cached_property
    def rates(self) -> np.ndarray:
        """Float array of shape (scenarios, c)."""
        return np.array([[float(d.rate) for d in s.slots] for s in self.scenarios], dtype=float)

    @cached_property
    def slot_means(self) -> np.ndarray:
        return self.shifts + self.rates

    @property
    def total_mean(self) -> float:
        return float(mean_per_slot(self).sum())

    def is_zero(self) -> bool:
        return not self.shifts.any() and not self.rates.any()

    def __str__(self):
        lines = [f"ArrivalProcess(c={self.c}, scenarios={self.n_scenarios})"]
        for s in self.scenarios:
            body = " ".join(str(d) for d in s.slots)
            lines.append(f"  {s.weight:.6g}: {body}")
        return "\n".join(lines)


def poisson_process(cycle_length: int, rate) -> ArrivalProcess:
    """I.i.d. Poisson(``rate``) arrivals in every slot."""
    slot = SlotDistribution(0, as_fraction(rate))
    return ArrivalProcess(cycle_length, (Scenario(1.0, (slot,) * cycle_length),))


def zero_process(cycle_length: int) -> ArrivalProcess:
    return ArrivalProcess(cycle_length, (Scenario(1.0, (ZERO_SLOT,) * cycle_length),))


def independent_process(slots: Sequence) -> ArrivalProcess:
    """Single scenario with the given (independent, possibly non-identical) slots."""
    return ArrivalProcess(len(slots), (Scenario(1.0, tuple(slots)),))


def platoon_process(cycle_length: int, start: int, green: int, rate, weights, normalize: bool = False) -> ArrivalProcess:
    """Departures of an upstream signal as seen downstream.

    Scenario j (weight ``weights[j]``, j = 0..green) puts one arrival in each of
    the first j slots of the window starting at 0-based slot ``start`` and
    Poisson(``rate``) arrivals in the remaining window slots; other slots are empty.
    """
    if len(weights) != green + 1:
        raise ValueError("need green + 1 weights")
    lam = SlotDistribution(0, as_fraction(rate))
    items = []
    for j, w in enumerate(weights):
        slots = [ZERO_SLOT] * cycle_length
        for i in range(green):
            slots[(start + i) % cycle_length] = ONE_SLOT if i < j else lam
        items.append((w, slots))
    return ArrivalProcess.from_weighted(cycle_length, items, normalize=normalize)


# --- evaluation ---------------------------------------------------------------


def slot_pgf(d: SlotDistribution, z):
    z = np.asarray(z, dtype=complex) if np.iscomplexobj(z) else np.asarray(z, dtype=float)
    out = np.power(z, d.shift) * np.exp(float(d.rate) * (z - 1.0))
    return out[()] if out.ndim == 0 else out


def slot_pmf(d: SlotDistribution, n: int) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = n - d.shift
    if k < 0:
        return 0.0
    lam = float(d.rate)
    if lam == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def joint_pgf(p: ArrivalProcess, y) -> complex:
    """E[prod_i y_i^{Y_i}] for a vector ``y`` of length c."""
    y = np.asarray(y, dtype=complex)
    if y.shape != (p.c,):
        raise ValueError(f"expected {p.c} arguments, got shape {y.shape}")
    factors = np.power(y, p.shifts) * np.exp(p.rates * (y - 1.0))
    return complex(p.weights @ np.prod(factors, axis=1))


def total_pgf(p: ArrivalProcess, z):
    """Y(z, ..., z); accepts scalars or arrays."""
    z = np.asarray(z, dtype=complex)
    s_tot = p.shifts.sum(axis=1)
    l_tot = p.rates.sum(axis=1)
    zz = z[..., None]
    out = (np.power(zz, s_tot) * np.exp(l_tot * (zz - 1.0))) @ p.weights
    return out[()] if out.ndim == 0 else out


def _scenario_prefix_pmf(p: ArrivalProcess, prefix: Sequence[int]) -> np.ndarray:
    """Per-scenario P(Y_1=n_1, ..., Y_j=n_j)."""
    out = np.ones(p.n_scenarios)
    for s_idx, s in enumerate(p.scenarios):
        for d, n in zip(s.slots, prefix):
            out[s_idx] *= slot_pmf(d, n)
    return out


def h_eval(p: ArrivalProcess, m: int, z: complex, tail: Sequence, prefix: Sequence[int]) -> complex:
    """Coefficient-extracted mixed pgf h_m(z, y_{m+1}, ..., y_c; n_1, ..., n_j).

    The first j slots are fixed to ``prefix``, slots j+1..m are evaluated at z
    and divided by z^(m-j), slots m+1..c take the arguments in ``tail``.
    """
    j = len(prefix)
    if not 0 <= j <= m <= p.c:
        raise ValueError(f"need 0 <= j={j} <= m={m} <= c={p.c}")
    tail = np.asarray(tail, dtype=complex)
    if tail.shape != (p.c - m,):
        raise ValueError(f"tail must have length {p.c - m}")
    if z == 0 and m > j:
        raise ZeroDivisionError("h_m has a pole at z=0 when m > j")
    z = complex(z)
    pre = _scenario_prefix_pmf(p, prefix)
    mid_shift = p.shifts[:, j:m].sum(axis=1) - (m - j)
    mid_rate = p.rates[:, j:m].sum(axis=1)
    if m > j:
        mid = np.exp(mid_shift * np.log(z) + mid_rate * (z - 1.0))
    else:
        mid = np.ones(p.n_scenarios)
    tail_f = np.prod(np.power(tail, p.shifts[:, m:]) * np.exp(p.rates[:, m:] * (tail - 1.0)), axis=1)
    return complex(np.sum(p.weights * pre * mid * tail_f))


def prefix_prob(p: ArrivalProcess, prefix: Sequence[int]) -> float:
    """P(Y_1=n_1, ..., Y_j=n_j)."""
    return float(p.weights @ _scenario_prefix_pmf(p, prefix))


def mean_per_slot(p: ArrivalProcess) -> np.ndarray:
    return p.weights @ p.slot_means


def compact(p: ArrivalProcess, eps_weight: float = 0.0) -> ArrivalProcess:
    """Merge scenarios with identical slot laws; drop weights below ``eps_weight``.

    Surviving weights are renormalized, so the total-variation change is at most
    twice the dropped mass.
    """
    if eps_weight < 0:
        raise ValueError("eps_weight must be nonnegative")
    merged: dict = {}
    for s in p.scenarios:
        k = s.key
        if k in merged:
            merged[k][0].append(s.weight)
        else:
            merged[k] = ([s.weight], s.slots)
    items = [(math.fsum(ws), slots) for ws, slots in merged.values()]
    kept = [(w, slots) for w, slots in items if w >= eps_weight]
    if not kept:
        raise ValueError("eps_weight removes every scenario")
    total = math.fsum(w for w, _ in kept)
    return ArrivalProcess(p.c, tuple(Scenario(w / total, slots) for w, slots in kept))


def superpose(a: ArrivalProcess, b: ArrivalProcess, eps_weight: float = 0.0) -> ArrivalProcess:
    """Law of the slot-wise sum of two independent arrival processes."""
    if a.c != b.c:
        raise ValueError(f"cycle mismatch: {a.c} != {b.c}")
    items = []
    for sa in a.scenarios:
        for sb in b.scenarios:
            slots = tuple(x + y for x, y in zip(sa.slots, sb.slots))
            items.append(Scenario(sa.weight * sb.weight, slots))
    raw = ArrivalProcess.__new__(ArrivalProcess)
    object.__setattr__(raw, "cycle_length", a.c)
    object.__setattr__(raw, "scenarios", tuple(items))
    return compact(raw, eps_weight)
