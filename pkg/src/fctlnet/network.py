"""Decomposition of an acyclic network of signalized queues.

All signals share one cycle length and one time frame. A queue's
``plan.offset`` counts the frame slots before its first green slot; the
queue is analyzed in its own frame (green first) and its departures are
mapped back to the shared frame, delayed by the link travel time, and
rotated into the receiving queue's frame.
"""

from __future__ import annotations

import graphlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache

from .arrivals import ZERO_SLOT, ArrivalProcess, Scenario, compact, mean_per_slot, superpose
from .errors import FCTLError, InstabilityError
from .lattice import enumerate_G
from .output import OutputProcess, output_pgf
from .solver import QueueSolution, SignalPlan, solve_q

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Link:
    source: str
    travel_time: int = 0

    def __post_init__(self):
        if self.travel_time < 0:
            raise ValueError("travel time must be nonnegative")


@dataclass(frozen=True)
class Node:
    """One signalized queue.

    ``external`` arrivals are given in the shared frame; ``inputs`` are links
    from upstream queues whose departures feed this one.
    """

    name: str
    plan: SignalPlan
    external: ArrivalProcess | None = None
    inputs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.external is None and not self.inputs:
            raise ValueError(f"queue {self.name!r} has no arrivals at all")


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple
    cycle_length: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate queue names")
        for n in self.nodes:
            if n.plan.c != self.cycle_length:
                raise ValueError(f"queue {n.name!r} has cycle {n.plan.c}, network uses {self.cycle_length}")
            if n.external is not None and n.external.c != self.cycle_length:
                raise ValueError(f"queue {n.name!r}: external arrivals have the wrong cycle length")
            for link in n.inputs:
                if link.source not in names:
                    raise ValueError(f"queue {n.name!r} references unknown source {link.source!r}")

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def order(self) -> list:
        """Topological order; raises FCTLError on a cycle."""
        ts = graphlib.TopologicalSorter({n.name: [l.source for l in n.inputs] for n in self.nodes})
        try:
            order = list(ts.static_order())
        except graphlib.CycleError as exc:
            raise FCTLError(f"network contains a cycle: {exc.args[1]}") from exc
        rank = {n.name: i for i, n in enumerate(self.nodes)}
        # static_order is deterministic but not declaration-ordered; stable re-sort by depth
        depth: dict = {}
        for name in order:
            node = self.node(name)
            depth[name] = 1 + max((depth[l.source] for l in node.inputs), default=-1)
        return sorted(order, key=lambda n: (depth[n], rank[n]))


@dataclass
class NodeResult:
    solution: QueueSolution
    output: OutputProcess
    arrivals: ArrivalProcess  # in the queue's own frame
    rho: float


@dataclass
class NetworkSolution:
    spec: NetworkSpec
    results: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> NodeResult:
        return self.results[name]


def rotate(p: ArrivalProcess, offset: int) -> ArrivalProcess:
    """Re-index a shared-frame process into a frame that starts ``offset`` slots later."""
    c = p.c
    if offset % c == 0:
        return p
    scen = tuple(Scenario(s.weight, tuple(s.slots[(i + offset) % c] for i in range(c))) for s in p.scenarios)
    return ArrivalProcess(c, scen)


def embed_output(o: OutputProcess, d: int, delta: int, c: int) -> ArrivalProcess:
    """Place green-slot departures into a c-slot arrival frame.

    Green slot k (1-based) of the upstream queue lands in slot
    ((k - 1 + delta + d) mod c) + 1; slots reached by no departure carry no arrivals.
    """
    if o.g > c:
        raise ValueError("green period longer than the cycle")
    targets = [(k + delta + d) % c for k in range(o.g)]
    scen = []
    for s in o.process.scenarios:
        slots = [ZERO_SLOT] * c
        for k, t in enumerate(targets):
            slots[t] = s.slots[k]
        scen.append(Scenario(s.weight, tuple(slots)))
    return ArrivalProcess(c, tuple(scen))


@lru_cache(maxsize=None)
def _g_table(g: int):
    return enumerate_G(g)


def node_input(spec: NetworkSpec, node: Node, outputs: dict, eps_weight: float = 0.0) -> ArrivalProcess:
    """Superposed arrivals of ``node`` in the shared frame."""
    c = spec.cycle_length
    parts = []
    if node.external is not None:
        parts.append(node.external)
    for link in node.inputs:
        src = spec.node(link.source)
        parts.append(embed_output(outputs[link.source], link.travel_time, src.plan.offset, c))
    total = parts[0]
    for p in parts[1:]:
        total = superpose(total, p, eps_weight)
    return compact(total, eps_weight)


def analyze_network(spec: NetworkSpec, eps_weight: float = 0.0) -> NetworkSolution:
    """Solve every queue in topological order, feeding departures downstream."""
    sol = NetworkSolution(spec)
    outputs: dict = {}
    for name in spec.order():
        node = spec.node(name)
        shared = node_input(spec, node, outputs, eps_weight)
        local = rotate(shared, node.plan.offset)
        rho = float(mean_per_slot(local).sum()) / node.plan.g
        if not rho < 1.0:
            raise InstabilityError(f"queue {name!r} is unstable (rho={rho:.4f})", rho=rho, queue=name)
        qs = solve_q(node.plan, local, _g_table(node.plan.g))
        out = output_pgf(qs, eps_weight)
        outputs[name] = out
        sol.results[name] = NodeResult(qs, out, local, rho)
        log.info("solved %s: rho=%.4f scenarios=%d mean=%.4f", name, rho, local.n_scenarios, qs.mean_xbar)
    return sol


def derived_input_report(solution: NetworkSolution, name: str) -> str:
    """Readable dump of the arrival mixture feeding queue ``name`` (its own frame)."""
    res = solution[name]
    p = res.arrivals
    lines = [f"queue {name}: rho={res.rho:.6f}, {p.n_scenarios} scenario(s), c={p.c}"]
    for s in sorted(p.scenarios, key=lambda s: s.key):
        body = " ".join(str(d) for d in s.slots)
        lines.append(f"  w={s.weight:.6f}  {body}")
    return "\n".join(lines)


# --- the two line networks used throughout the examples ---------------------------


def line_network(
    n: int,
    main_rate,
    travel_time: int,
    green: int = 10,
    red: int = 10,
    side_rate=None,
    side_green: int = 3,
    side_offset: int = 15,
) -> NetworkSpec:
    """Line of ``n`` intersections with Poisson input at the head and optional side flows.

    Side queue i (i < n) has Poisson(``side_rate``) input, ``side_green`` green
    slots starting after ``side_offset`` slots, and feeds main queue i+1.
    """
    from .arrivals import poisson_process

    c = green + red
    nodes = []
    for i in range(1, n + 1):
        inputs = []
        if i > 1:
            inputs.append(Link(f"main{i - 1}", travel_time))
            if side_rate is not None:
                inputs.append(Link(f"side{i - 1}", travel_time))
        ext = poisson_process(c, main_rate) if i == 1 else None
        nodes.append(Node(f"main{i}", SignalPlan(green, red), ext, tuple(inputs)))
        if side_rate is not None and i < n:
            plan = SignalPlan(side_green, c - side_green, side_offset)
            nodes.append(Node(f"side{i}", plan, poisson_process(c, side_rate)))
    return NetworkSpec(tuple(nodes), c)
