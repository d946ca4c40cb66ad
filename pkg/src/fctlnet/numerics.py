"""Roots of z^g = Y(z, ..., z) inside the unit disk, and pgf inversion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .arrivals import ArrivalProcess
from .errors import InstabilityError, NumericsError

log = logging.getLogger(__name__)

DISTINCT_TOL = 1e-8
NEWTON_TOL = 1e-13
NEWTON_MAXITER = 100
RESIDUAL_TOL = 1e-10
CIRCLE_TOL = 1e-10
TRUNC_START = 90
TRUNC_STEP = 10
TRUNC_CAP = 500


@dataclass(frozen=True)
class RootSet:
    roots: tuple
    residuals: tuple

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.roots, dtype=complex)


def _grouped_totals(p: ArrivalProcess):
    """Scenario weights grouped by (total shift, total rate) of the whole cycle."""
    groups: dict = {}
    s_tot = p.shifts.sum(axis=1)
    rates = [sum((d.rate for d in s.slots), start=0) for s in p.scenarios]
    for w, s, lam in zip(p.weights, s_tot, rates):
        key = (int(s), lam)
        groups[key] = groups.get(key, 0.0) + float(w)
    keys = sorted(groups)
    shifts = np.array([k[0] for k in keys], dtype=np.int64)
    lams = np.array([float(k[1]) for k in keys], dtype=float)
    ws = np.array([groups[k] for k in keys])
    return ws, shifts, lams


def taylor_coeffs(p: ArrivalProcess, g: int, n: int) -> np.ndarray:
    """Coefficients a_0..a_n of z^g - Y(z, ..., z) expanded about z = 0."""
    if n < g:
        raise ValueError("truncation order must be at least g")
    ws, shifts, lams = _grouped_totals(p)
    k = np.arange(n + 1)
    out = np.zeros(n + 1)
    out[g] = 1.0
    for w, s, lam in zip(ws, shifts, lams):
        m = k - s
        valid = m >= 0
        term = np.zeros(n + 1)
        if lam == 0.0:
            term[valid & (m == 0)] = 1.0
        else:
            mv = m[valid]
            term[valid] = np.exp(-lam + mv * math.log(lam) - gammaln(mv + 1))
        out -= w * term
    return out


def denominator(p: ArrivalProcess, g: int, z):
    """D(z) = z^g - Y(z, ..., z) with its derivative, vectorized over z."""
    ws, shifts, lams = _grouped_totals(p)
    z = np.asarray(z, dtype=complex)
    zz = z[..., None]
    e = np.power(zz, shifts) * np.exp(lams * (zz - 1.0))
    d = np.power(z, g) - e @ ws
    with np.errstate(divide="ignore", invalid="ignore"):
        de = e * (np.where(shifts > 0, shifts / zz, 0.0) + lams)
    dd = g * np.power(z, g - 1) - de @ ws
    return d, dd


def _newton(p: ArrivalProcess, g: int, seeds: np.ndarray):
    z = seeds.astype(complex).copy()
    active = np.ones(z.shape, dtype=bool)
    converged = np.zeros(z.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(NEWTON_MAXITER):
            if not active.any():
                break
            d, dd = denominator(p, g, z[active])
            step = d / dd
            znew = z[active] - step
            bad = ~np.isfinite(znew) | (np.abs(znew) > 10.0)
            done = np.abs(step) <= NEWTON_TOL * np.maximum(1.0, np.abs(znew))
            idx = np.flatnonzero(active)
            z[idx] = np.where(bad, z[idx], znew)
            converged[idx[done & ~bad]] = True
            active[idx[done | bad]] = False
    return z, converged


def find_roots(p: ArrivalProcess, g: int) -> RootSet:
    """The g-1 roots of z^g = Y(z, ..., z) strictly inside the unit disk, z = 1 excluded."""
    if g < 1:
        raise ValueError("green length must be at least 1")
    mean = p.total_mean
    if not mean < g:
        raise InstabilityError(f"unstable: E[Y]={mean:.6g} >= g={g}", rho=mean / g)
    if g == 1:
        return RootSet((), ())
    if p.is_zero():
        raise NumericsError("no arrivals: all roots of z^g = 1 lie on the unit circle")
    if p.shifts.sum(axis=1).min() > 0:
        # Y(0) = 0, so z = 0 is a root (of multiplicity min total shift)
        raise NumericsError("every cycle carries deterministic arrivals: z=0 is a root, which is not supported")

    n = g + TRUNC_START - TRUNC_STEP  # first pass uses g + TRUNC_START
    found: list = []
    while len(found) != g - 1:
        n += TRUNC_STEP
        if n > g + TRUNC_CAP:
            raise NumericsError(
                f"found {len(found)} of {g - 1} roots inside the unit disk "
                f"after truncation order {n - TRUNC_STEP}"
            )
        coeffs = taylor_coeffs(p, g, n)
        seeds = np.roots(coeffs[::-1])
        z, ok = _newton(p, g, seeds)
        found = []
        near_circle = []
        for zi in z[ok]:
            if abs(zi - 1.0) < DISTINCT_TOL:
                continue
            r = abs(zi)
            if abs(r - 1.0) <= CIRCLE_TOL:
                near_circle.append(zi)
                continue
            if r < 1.0 and all(abs(zi - w) > DISTINCT_TOL for w in found):
                found.append(zi)
        if near_circle:
            raise NumericsError(f"roots on the unit circle other than z=1: {near_circle[:4]}")
        log.debug("truncation %d: %d roots inside the disk", n, len(found))

    # exact conjugate symmetry: pair each root with its mirror
    roots = np.array(found)
    roots = np.where(np.abs(roots.imag) < DISTINCT_TOL, roots.real + 0j, roots)
    roots = sorted(roots, key=lambda w: (round(w.real, 12), w.imag))
    res = np.abs(denominator(p, g, np.array(roots))[0])
    if res.max(initial=0.0) >= RESIDUAL_TOL:
        raise NumericsError(f"root residual {res.max():.3e} exceeds {RESIDUAL_TOL}")
    return RootSet(tuple(complex(r) for r in roots), tuple(float(x) for x in res))


def invert_pgf(X, k: int) -> float:
    """P(X = k) from the pgf evaluator ``X`` (Abate-Whitt trapezoid, l=1, gamma=10)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    ell = 1
    gamma = 10
    if k == 0:
        p = complex(X(10.0 ** (-gamma))).real
    else:
        r = 10.0 ** (-gamma / (2 * ell * k))
        j = np.arange(1, ell * k)
        pts = r * np.exp(1j * np.pi * j / (ell * k))
        # the phase factor multiplies X; it is not part of the argument
        phase = np.exp(-1j * np.pi * j / ell)
        inner = sum((ph * complex(X(pt))).real for ph, pt in zip(phase, pts))
        total = complex(X(r)).real + (-1) ** k * complex(X(-r)).real + 2.0 * inner
        p = total / (2 * ell * k * r**k)
    if -1e-8 <= p < 0:
        p = 0.0
    return float(p)


def pgf_coefficients(X, n_terms: int, radius: float = 0.8, n_points: int = 512) -> np.ndarray:
    """First ``n_terms`` power-series coefficients of ``X`` by the trapezoid rule on |z| = radius.

    ``X`` must accept an array of complex points. Unlike :func:`invert_pgf` the
    contour stays away from the origin, which matters for pgfs whose closed form
    divides by powers of z.
    """
    if n_terms < 1:
        raise ValueError("need at least one coefficient")
    # coefficient k is scaled by radius**-k; keep that factor below 100 and
    # add points so the aliased terms (radius**n_points) stay negligible
    radius = max(radius, 10.0 ** (-2.0 / n_terms))
    n_points = max(n_points, 16 * n_terms)
    theta = 2.0 * np.pi * np.arange(n_points) / n_points
    vals = np.asarray(X(radius * np.exp(1j * theta)), dtype=complex)
    coef = np.fft.fft(vals) / n_points
    out = coef[:n_terms].real / radius ** np.arange(n_terms)
    out[(out < 0) & (out >= -1e-8)] = 0.0
    return out
