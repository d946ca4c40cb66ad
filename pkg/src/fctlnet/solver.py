"""Stationary queue-length law of one fixed-cycle traffic-light queue.

The queue is observed in its own frame: slots 1..g are green, g+1..c red.
Queue lengths X_k are taken at the end of slot k, X_0 at the cycle start.

Every pgf in this module is a weighted sum of terms z^a exp(lam (z - 1)).
Differences of two such terms are formed through ``expm1`` so that the
quotient in the X_0 formula keeps full relative accuracy near z = 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .arrivals import ArrivalProcess
from .errors import InstabilityError, NumericsError
from .lattice import GTable, enumerate_G
from .numerics import RootSet, find_roots, invert_pgf, pgf_coefficients

log = logging.getLogger(__name__)

SINGULAR_RADIUS = 1e-7
CLAMP_TOL = 1e-10
LINSYS_TOL = 1e-9


@dataclass(frozen=True)
class SignalPlan:
    """Fixed signal: ``green`` slots then ``red`` slots.

    ``offset`` is the number of slots, in the shared network frame, that
    precede this signal's first green slot.
    """

    green: int
    red: int
    offset: int = 0

    def __post_init__(self):
        if self.green < 1 or self.red < 0 or self.offset < 0:
            raise ValueError(f"invalid signal plan {self}")

    @property
    def g(self) -> int:
        return self.green

    @property
    def r(self) -> int:
        return self.red

    @property
    def c(self) -> int:
        return self.green + self.red


# --- term algebra ---------------------------------------------------------------


def _pexp(a, lam, z):
    """z^a exp(lam (z-1)) broadcast over trailing term axes."""
    zz = np.asarray(z, dtype=complex)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.power(zz, a) * np.exp(lam * (zz - 1.0))


def _pexp_diff(a1, l1, a2, l2, z):
    """z^a1 e^{l1(z-1)} - z^a2 e^{l2(z-1)}, accurate when both terms are close to 1."""
    zz = np.asarray(z, dtype=complex)[..., None]
    w = zz - 1.0
    near = np.abs(w) < 0.5
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logz = np.log1p(np.where(near, w, 0.0))
        e1 = np.exp(a1 * logz + l1 * w)
        close = -e1 * np.expm1((a2 - a1) * logz + (l2 - l1) * w)
        far = np.power(zz, a1) * np.exp(l1 * w) - np.power(zz, a2) * np.exp(l2 * w)
    return np.where(near, close, far)


def _pexp_derivs(a, lam, z):
    """First and second z-derivatives of z^a exp(lam (z-1))."""
    zz = np.asarray(z, dtype=complex)[..., None]
    e = _pexp(a, lam, z)
    t = a / zz + lam
    return e * t, e * (t * t - a / (zz * zz))


def _factorial_moment2(a, lam):
    """E[T(T-1)] for T = a + Poisson(lam)."""
    mu = a + lam
    return mu * mu - mu + lam


# --- solution object ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QueueSolution:
    plan: SignalPlan
    arrivals: ArrivalProcess
    q: np.ndarray
    roots: RootSet
    g_table: GTable
    pattern_prob: np.ndarray  # [l, j, s] = P_s(A_j summed over G[j, l])
    residual: float = 0.0

    @property
    def g(self) -> int:
        return self.plan.g

    @property
    def c(self) -> int:
        return self.plan.c

    @cached_property
    def _pre(self):
        """Cumulative shift/rate sums over slots 1..k, shape (S, c+1)."""
        p = self.arrivals
        z = np.zeros((p.n_scenarios, 1))
        return (
            np.concatenate([z, np.cumsum(p.shifts, axis=1)], axis=1),
            np.concatenate([z, np.cumsum(p.rates, axis=1)], axis=1),
        )

    @cached_property
    def coeff(self) -> np.ndarray:
        """C[j, s] = w_s sum_l q_l P_s(G=j from l); total mass of effective green j."""
        return np.einsum("l,ljs->js", self.q, self.pattern_prob) * self.arrivals.weights

    @cached_property
    def _num_terms(self):
        # flattened (j, s) terms of N(z) = sum C (z^{g+Sr} e^{..} - z^{j+S_{j+1..c}} e^{..})
        g, c = self.g, self.c
        ps, pr = self._pre
        j = np.arange(g)[:, None]
        a1 = np.broadcast_to(g + ps[:, c] - ps[:, g], (g, ps.shape[0]))
        l1 = np.broadcast_to(pr[:, c] - pr[:, g], a1.shape)
        a2 = j + ps[:, c][None, :] - ps[:, :g].T
        l2 = pr[:, c][None, :] - pr[:, :g].T
        return a1.ravel(), l1.ravel(), a2.ravel(), l2.ravel()

    @cached_property
    def _den_terms(self):
        ps, pr = self._pre
        return ps[:, self.c], pr[:, self.c]

    # -- numerator / denominator --

    def numerator(self, z):
        a1, l1, a2, l2 = self._num_terms
        return _pexp_diff(a1, l1, a2, l2, z) @ self.coeff.ravel()

    def denominator(self, z):
        s, lam = self._den_terms
        return _pexp_diff(self.g, 0.0, s, lam, z) @ self.arrivals.weights

    def _num_derivs(self, z):
        a1, l1, a2, l2 = self._num_terms
        d1a, d2a = _pexp_derivs(a1, l1, z)
        d1b, d2b = _pexp_derivs(a2, l2, z)
        cf = self.coeff.ravel()
        return (d1a - d1b) @ cf, (d2a - d2b) @ cf

    def _den_derivs(self, z):
        s, lam = self._den_terms
        d1, d2 = _pexp_derivs(s, lam, z)
        zz = np.asarray(z, dtype=complex)
        g = self.g
        w = self.arrivals.weights
        return g * zz ** (g - 1) - d1 @ w, g * (g - 1) * zz ** (g - 2) - d2 @ w

    @cached_property
    def singular_points(self) -> np.ndarray:
        return np.concatenate([[1.0 + 0j], self.roots.array])

    def x0(self, z):
        """X_0(z) = N(z) / D(z), continued analytically through its removable singularities."""
        z = np.asarray(z, dtype=complex)
        if self.arrivals.is_zero():
            return np.ones_like(z)[()]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.numerator(z) / self.denominator(z)
        dist = np.abs(z[..., None] - self.singular_points)
        near = dist.min(axis=-1) < SINGULAR_RADIUS
        if np.any(near):
            zs = z[near]
            star = self.singular_points[dist[near].argmin(axis=-1)]
            n1, n2 = self._num_derivs(star)
            d1, d2 = self._den_derivs(star)
            h = zs - star
            # second-order expansion of the 0/0 quotient about the singular point
            out = np.array(out, dtype=complex)
            out[near] = (n1 + 0.5 * h * n2) / (d1 + 0.5 * h * d2)
        return out[()] if np.ndim(out) == 0 else out

    def xk(self, k: int, z):
        """X_k(z), the pgf of the queue at the end of slot k (1 <= k <= c)."""
        if not 1 <= k <= self.c:
            raise ValueError(f"slot index k={k} outside 1..{self.c}")
        z = np.asarray(z, dtype=complex)
        if np.any(z == 0):
            raise ZeroDivisionError("X_k(z) is evaluated through z^-k; z=0 is not supported")
        g = self.g
        m = min(k, g)
        ps, pr = self._pre
        w = self.arrivals.weights
        yk = _pexp(ps[:, k], pr[:, k], z) @ w
        out = self.x0(z) * yk * z ** (-m)
        if m > 0:
            j = np.arange(m)[:, None]
            a1 = np.broadcast_to(ps[:, k] - ps[:, m], (m, ps.shape[0]))
            l1 = np.broadcast_to(pr[:, k] - pr[:, m], a1.shape)
            a2 = (j - m) + ps[:, k][None, :] - ps[:, :m].T
            l2 = pr[:, k][None, :] - pr[:, :m].T
            out = out + _pexp_diff(a1.ravel(), l1.ravel(), a2.ravel(), l2.ravel(), z) @ self.coeff[:m].ravel()
        return out[()] if np.ndim(out) == 0 else out

    def xbar(self, z):
        """Queue-length pgf at an arbitrary slot end."""
        return sum(self.xk(k, z) for k in range(1, self.c + 1)) / self.c

    def zeta(self, l: int, z):
        return zeta(self, l, z)

    # -- moments --

    @cached_property
    def mean_arrivals(self) -> np.ndarray:
        return self.arrivals.weights @ self.arrivals.slot_means

    @property
    def eta(self) -> float:
        return self.g - float(self.mean_arrivals.sum())

    @cached_property
    def mean_x0(self) -> float:
        """E[X_0] = (N''(1) - D''(1)) / (2 D'(1))."""
        if self.arrivals.is_zero():
            return 0.0
        a1, l1, a2, l2 = self._num_terms
        n2 = (_factorial_moment2(a1, l1) - _factorial_moment2(a2, l2)) @ self.coeff.ravel()
        s, lam = self._den_terms
        d2 = self.g * (self.g - 1) - _factorial_moment2(s, lam) @ self.arrivals.weights
        return float((n2 - d2) / (2.0 * self.eta))

    @cached_property
    def mean_queue(self) -> np.ndarray:
        """E[X_k] for k = 0..c."""
        g, c = self.g, self.c
        ey = self.mean_arrivals
        sm = self.arrivals.slot_means
        out = np.empty(c + 1)
        out[0] = self.mean_x0
        for k in range(1, g + 1):
            # empties by slot k-1 ⇒ slot k passes its arrivals instead of serving one
            corr = np.sum(self.coeff[:k] * (1.0 - sm[:, k - 1])[None, :])
            out[k] = out[k - 1] + ey[k - 1] - 1.0 + corr
        fwd_g = out[g]
        out[c] = out[0]
        for k in range(c - 1, g - 1, -1):
            out[k] = out[k + 1] - ey[k]
        if abs(out[g] - fwd_g) > 1e-8 * max(1.0, abs(fwd_g)):
            log.warning("green/red mean recursions disagree at slot g: %.3e", out[g] - fwd_g)
        return out

    @property
    def mean_xbar(self) -> float:
        return float(self.mean_queue[1:].mean())

    # -- distributions --

    @cached_property
    def effective_green(self) -> np.ndarray:
        """P(G = j) for j = 0..g."""
        pg = np.zeros(self.g + 1)
        pg[: self.g] = self.coeff.sum(axis=1)
        pg[self.g] = 1.0 - pg[: self.g].sum()
        return pg

    def prob_empty(self, k: int) -> float:
        """P(X_k = 0) for 0 <= k <= g-1."""
        if not 0 <= k < self.g:
            raise ValueError("P(X_k = 0) is closed-form only for k < g")
        return float(self.effective_green[: k + 1].sum())

    def x0_pmf(self, n_terms: int) -> np.ndarray:
        """P(X_0 = n), n < n_terms: exact q_l below g, Abate-Whitt inversion above."""
        out = np.zeros(n_terms)
        m = min(n_terms, self.g)
        out[:m] = self.q[:m]
        for n in range(self.g, n_terms):
            out[n] = invert_pgf(self.x0, n)
        return out

    def pmf(self, which, n_terms: int, radius: float = 0.8, n_points: int = 512) -> np.ndarray:
        """Distribution of X_k (int k) or of the arbitrary-slot queue ('bar')."""
        if which == "bar":
            f = self.xbar
        elif which == 0:
            f = self.x0
        else:
            f = lambda z: self.xk(int(which), z)  # noqa: E731
        return pgf_coefficients(f, n_terms, radius=radius, n_points=n_points)


def zeta(sol: QueueSolution, l: int, z):
    """Correction function for start level l: sum over emptying patterns of the pgf change."""
    if not 0 <= l < sol.g:
        raise ValueError(f"l={l} outside 0..{sol.g - 1}")
    a1, l1, a2, l2 = sol._num_terms
    cf = (sol.pattern_prob[l] * sol.arrivals.weights).ravel()
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ZeroDivisionError("zeta is not evaluated at z=0")
    out = _pexp_diff(a1, l1, a2, l2, z) @ cf
    return out[()] if np.ndim(out) == 0 else out


def zeta_prime_one(sol_or_parts, l: int) -> float:
    """b_l = zeta_l'(1) in closed form."""
    sol = sol_or_parts
    ps, _ = sol._pre
    g = sol.g
    sm = sol.arrivals.slot_means
    green_tail = np.cumsum(sm[:, :g][:, ::-1], axis=1)[:, ::-1]  # sum_{i=j+1}^g E_s[Y_i]
    j = np.arange(g)[:, None]
    per = g - j - green_tail.T  # (j, s)
    return float(np.sum(sol.pattern_prob[l] * per * sol.arrivals.weights))


def pattern_probabilities(p: ArrivalProcess, table: GTable) -> np.ndarray:
    """P_s(Y_1..Y_j in G[j, l]) per start level l, green-empty slot j and scenario s."""
    g = table.g
    nmax = g + 1
    n = np.arange(nmax)
    k = n[None, None, :] - p.shifts[:, :g, None]
    lam = p.rates[:, :g, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logpm = -lam + k * np.log(np.where(lam > 0, lam, 1.0)) - gammaln(np.maximum(k, 0) + 1)
        pm = np.where(k >= 0, np.exp(logpm), 0.0)
        pm = np.where((lam == 0) & (k > 0), 0.0, pm)
    out = np.zeros((g, g, p.n_scenarios))
    out[0, 0, :] = 1.0
    for (j, l), arr in table.arrays().items():
        if j == 0:
            continue
        vals = pm[:, np.arange(j), arr]  # (S, K, j)
        out[l, j, :] = np.prod(vals, axis=2).sum(axis=1)
    return out


def solve_q(plan: SignalPlan, arrivals: ArrivalProcess, g_table: GTable | None = None) -> QueueSolution:
    """Boundary probabilities q_l = P(X_0 = l), l < g, and the resulting solution object."""
    g = plan.g
    if arrivals.c != plan.c:
        raise ValueError(f"arrival cycle {arrivals.c} != signal cycle {plan.c}")
    mean = float(arrivals.weights @ arrivals.slot_means.sum(axis=1))
    if not mean < g:
        raise InstabilityError(f"unstable queue: E[Y]={mean:.6g} >= g={g}", rho=mean / g)
    table = g_table if g_table is not None else enumerate_G(g)
    if table.g != g:
        raise ValueError("lattice table built for a different green length")
    pa = pattern_probabilities(arrivals, table)

    if arrivals.is_zero():
        q = np.zeros(g)
        q[0] = 1.0
        return QueueSolution(plan, arrivals, q, RootSet((), ()), table, pa)

    roots = find_roots(arrivals, g)
    probe = QueueSolution(plan, arrivals, np.zeros(g), roots, table, pa)
    A = np.empty((g, g), dtype=complex)
    A[0] = [zeta_prime_one(probe, l) for l in range(g)]
    for i, zi in enumerate(roots.roots, start=1):
        A[i] = [zeta(probe, l, zi) for l in range(g)]
    rhs = np.zeros(g, dtype=complex)
    rhs[0] = g - mean
    try:
        qc = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"singular boundary system (cond={np.linalg.cond(A):.3e})") from exc
    resid = float(np.max(np.abs(A @ qc - rhs)))
    if resid > LINSYS_TOL:
        raise NumericsError(f"boundary system residual {resid:.3e} (cond={np.linalg.cond(A):.3e})")
    if np.max(np.abs(qc.imag)) > 1e-8:
        raise NumericsError(f"boundary probabilities not real: max imag {np.max(np.abs(qc.imag)):.3e}")
    q = qc.real.copy()
    if q.min() < -CLAMP_TOL:
        raise NumericsError(f"negative boundary probability {q.min():.3e}")
    if q.min() < 0:
        log.warning("clamping boundary probabilities down to %.3e", q.min())
        q = np.maximum(q, 0.0)
    return QueueSolution(plan, arrivals, q, roots, table, pa, resid)


def tail_table(sol: QueueSolution, levels: int = 6) -> dict:
    """P(X >= m), m = 1..levels, for X_0, X_g and the arbitrary-slot queue."""
    p0 = sol.x0_pmf(levels)
    pg = sol.pmf(sol.g, levels)
    pb = sol.pmf("bar", levels)
    return {
        "X0": 1.0 - np.cumsum(p0),
        f"X{sol.g}": 1.0 - np.cumsum(pg),
        "Xbar": 1.0 - np.cumsum(pb),
    }
