"""Slot-level simulation of single queues and of coupled networks.

The network simulator is the ground truth for the decomposition: departures
reach the next queue ``travel_time`` slots later in absolute time, with no
cycle-independence assumption. Random streams come from numpy's Philox
generator, one independent stream per (replication, queue) spawned from a
single :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .arrivals import ArrivalProcess
from .network import NetworkSpec, Node
from .solver import SignalPlan

HIST_CAP = 256
CHUNK_CYCLES = 10_000


@dataclass(frozen=True)
class SimConfig:
    cycles: int = 1_000_000
    warmup_cycles: int = 10_000
    seed: int = 20240101
    replications: int = 10

    def __post_init__(self):
        if not self.cycles > self.warmup_cycles >= 0:
            raise ValueError("need cycles > warmup_cycles >= 0")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class SimStats:
    """Replication means and standard errors for one queue (queue's own frame).

    ``slot_means[k]`` is E[X_k] for k = 0..c with X_0 taken as X_c of the
    previous cycle; tails are P(X >= m) for m = 1..levels.
    """

    plan: SignalPlan
    replications: int
    cycles: int
    slot_means: np.ndarray
    slot_stderr: np.ndarray
    mean_xbar: float
    mean_xbar_stderr: float
    tail_x0: np.ndarray
    tail_xg: np.ndarray
    tail_xbar: np.ndarray
    tail_stderr: dict
    green_hist: np.ndarray
    output_means: np.ndarray
    arrivals_per_cycle: float
    departures_per_cycle: float
    balance_stderr: float


@numba.njit(cache=True)
def _advance(
    ext, t0, in_ptr, src, delay, green, cyc, offset, x, gstate, ring,
    record_from, sums, hist, ghist, outsum, arrsum, depsum,
):  # pragma: no cover - compiled
    # links into node v are src[in_ptr[v]:in_ptr[v + 1]]
    n_nodes, T = ext.shape
    B = ring.shape[1]
    cap = hist.shape[2] - 1
    for tt in range(T):
        t = t0 + tt
        rec = t >= record_from
        for v in range(n_nodes):
            y = ext[v, tt]
            for e in range(in_ptr[v], in_ptr[v + 1]):
                ts = t - delay[e]
                if ts >= 0:
                    y += ring[src[e], ts % B]
            c = cyc[v]
            g = green[v]
            k = (t - offset[v]) % c
            xv = x[v]
            if k == 0:
                gstate[v] = 0 if xv == 0 else -1
            if k < g:
                if xv > 0:
                    dep = 1
                    xv = xv + y - 1
                else:
                    dep = y
                    xv = 0
                if xv == 0 and gstate[v] < 0 and k + 1 < g:
                    gstate[v] = k + 1
                if rec:
                    outsum[v, k] += dep
                    if k == g - 1:
                        ghist[v, gstate[v] if gstate[v] >= 0 else g] += 1
            else:
                dep = 0
                xv = xv + y
            x[v] = xv
            ring[v, t % B] = dep
            if rec:
                sums[v, k + 1] += xv
                hist[v, k + 1, xv if xv < cap else cap] += 1
                arrsum[v] += y
                depsum[v] += dep


def _sampler(p: ArrivalProcess):
    shifts = p.shifts.astype(np.int64)
    rates = p.rates
    weights = p.weights
    single = p.n_scenarios == 1
    poisson_mask = rates > 0

    def draw(rng, n_cycles):
        if single:
            idx = np.zeros(n_cycles, dtype=np.int64)
        else:
            idx = rng.choice(len(weights), size=n_cycles, p=weights)
        out = shifts[idx].copy()
        lam = rates[idx]
        mask = poisson_mask[idx]
        if mask.all():
            out += rng.poisson(lam)
        elif mask.any():
            out[mask] += rng.poisson(lam[mask])
        return out.reshape(-1)

    return draw


def _run_replication(spec: NetworkSpec, order, cfg: SimConfig, seeds):
    nodes = [spec.node(n) for n in order]
    index = {n.name: i for i, n in enumerate(nodes)}
    c = spec.cycle_length
    n = len(nodes)
    src, delay, in_ptr = [], [], [0]
    for node in nodes:
        for link in node.inputs:
            src.append(index[link.source])
            delay.append(link.travel_time)
        in_ptr.append(len(src))
    src = np.array(src, dtype=np.int64)
    in_ptr = np.array(in_ptr, dtype=np.int64)
    delay = np.array(delay, dtype=np.int64)
    green = np.array([nd.plan.g for nd in nodes], dtype=np.int64)
    cyc = np.array([nd.plan.c for nd in nodes], dtype=np.int64)
    offset = np.array([nd.plan.offset for nd in nodes], dtype=np.int64)
    B = int(delay.max(initial=0)) + 1

    rngs = [np.random.Generator(np.random.Philox(s)) for s in seeds]
    samplers = [_sampler(nd.external) if nd.external is not None else None for nd in nodes]

    x = np.zeros(n, dtype=np.int64)
    gstate = np.zeros(n, dtype=np.int64)
    ring = np.zeros((n, B), dtype=np.int64)
    sums = np.zeros((n, c + 1))
    hist = np.zeros((n, c + 1, HIST_CAP + 1), dtype=np.int64)
    ghist = np.zeros((n, int(green.max()) + 1), dtype=np.int64)
    outsum = np.zeros((n, int(green.max())))
    arrsum = np.zeros(n)
    depsum = np.zeros(n)

    record_from = cfg.warmup_cycles * c
    done = 0
    while done < cfg.cycles:
        m = min(CHUNK_CYCLES, cfg.cycles - done)
        ext = np.zeros((n, m * c), dtype=np.int64)
        for v in range(n):
            if samplers[v] is not None:
                ext[v] = samplers[v](rngs[v], m)
        _advance(ext, done * c, in_ptr, src, delay, green, cyc, offset, x, gstate, ring,
                 record_from, sums, hist, ghist, outsum, arrsum, depsum)
        done += m
    n_rec = cfg.cycles - cfg.warmup_cycles
    return {
        "slot_means": sums / n_rec,
        "hist": hist / n_rec,
        "ghist": ghist / n_rec,
        "outmeans": outsum / n_rec,
        "arr": arrsum / n_rec,
        "dep": depsum / n_rec,
    }, index


def _tails(pmf_hist, levels):
    # P(X >= m) = 1 - P(X <= m-1)
    cdf = np.cumsum(pmf_hist, axis=-1)
    return 1.0 - cdf[..., :levels]


def _mean_se(samples):
    samples = np.asarray(samples, dtype=float)
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])


def simulate_network(spec: NetworkSpec, cfg: SimConfig, levels: int = 6) -> dict:
    """Simulate the coupled network; returns {queue name: SimStats}."""
    order = spec.order()
    root = np.random.SeedSequence(cfg.seed)
    per_rep = []
    index = None
    for rep_seq in root.spawn(cfg.replications):
        res, index = _run_replication(spec, order, cfg, rep_seq.spawn(len(order)))
        per_rep.append(res)
    out = {}
    for name, v in index.items():
        node = spec.node(name)
        g, c = node.plan.g, node.plan.c
        slot = np.array([r["slot_means"][v] for r in per_rep])
        slot[:, 0] = slot[:, c]
        xbar = slot[:, 1:].mean(axis=1)
        hist = np.array([r["hist"][v] for r in per_rep])  # (R, c+1, H+1)
        t0 = _tails(hist[:, c], levels)
        tg = _tails(hist[:, g], levels)
        tb = _tails(hist[:, 1:].mean(axis=1), levels)
        gh = np.array([r["ghist"][v][: g + 1] for r in per_rep])
        om = np.array([r["outmeans"][v][:g] for r in per_rep])
        arr = np.array([r["arr"][v] for r in per_rep])
        dep = np.array([r["dep"][v] for r in per_rep])
        sm, sse = _mean_se(slot)
        xm, xse = _mean_se(xbar)
        (t0m, t0s), (tgm, tgs), (tbm, tbs) = _mean_se(t0), _mean_se(tg), _mean_se(tb)
        _, bal_se = _mean_se(arr - dep)
        out[name] = SimStats(
            plan=node.plan,
            replications=cfg.replications,
            cycles=cfg.cycles,
            slot_means=sm,
            slot_stderr=sse,
            mean_xbar=float(xm),
            mean_xbar_stderr=float(xse),
            tail_x0=t0m,
            tail_xg=tgm,
            tail_xbar=tbm,
            tail_stderr={"X0": t0s, "Xg": tgs, "Xbar": tbs},
            green_hist=gh.mean(axis=0),
            output_means=om.mean(axis=0),
            arrivals_per_cycle=float(arr.mean()),
            departures_per_cycle=float(dep.mean()),
            balance_stderr=float(bal_se),
        )
    return out


def simulate_single(arrivals: ArrivalProcess, plan: SignalPlan, cfg: SimConfig, levels: int = 6) -> SimStats:
    """Simulate one queue; ``arrivals`` are given in the queue's own frame."""
    spec = NetworkSpec((Node("queue", SignalPlan(plan.g, plan.r, 0), arrivals),), plan.c)
    return simulate_network(spec, cfg, levels)["queue"]


def sample_outputs(arrivals: ArrivalProcess, plan: SignalPlan, cycles: int, seed: int, warmup: int = 1000):
    """Per-cycle departure vectors (O_1..O_g) of a single queue, shape (cycles, g)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    draw = _sampler(arrivals)
    y = draw(rng, cycles + warmup).reshape(-1, plan.c)
    return _outputs_kernel(y, plan.g)[warmup:]


@numba.njit(cache=True)
def _outputs_kernel(y, g):  # pragma: no cover - compiled
    n, c = y.shape
    out = np.zeros((n, g), dtype=np.int64)
    x = 0
    for i in range(n):
        for k in range(c):
            if k < g:
                if x > 0:
                    out[i, k] = 1
                    x = x + y[i, k] - 1
                else:
                    out[i, k] = y[i, k]
            else:
                x += y[i, k]
    return out
