"""Exact analysis of fixed-cycle traffic-light queues with correlated arrivals,
network decomposition, and a slot-level simulator to check it against."""

__version__ = "0.1.0"

from .arrivals import (
    ArrivalProcess,
    Scenario,
    SlotDistribution,
    platoon_process,
    poisson_process,
    superpose,
    zero_process,
)
from .errors import ConfigError, FCTLError, InstabilityError, NumericsError
from .lattice import enumerate_G
from .network import Link, NetworkSpec, Node, analyze_network, line_network
from .numerics import find_roots, invert_pgf
from .output import output_pgf
from .solver import QueueSolution, SignalPlan, solve_q, tail_table

__all__ = [
    "ArrivalProcess",
    "Scenario",
    "SlotDistribution",
    "platoon_process",
    "poisson_process",
    "superpose",
    "zero_process",
    "ConfigError",
    "FCTLError",
    "InstabilityError",
    "NumericsError",
    "enumerate_G",
    "Link",
    "NetworkSpec",
    "Node",
    "analyze_network",
    "line_network",
    "find_roots",
    "invert_pgf",
    "output_pgf",
    "QueueSolution",
    "SignalPlan",
    "solve_q",
    "tail_table",
]
