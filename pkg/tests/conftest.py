import numpy as np
import pytest

from fctlnet.arrivals import platoon_process, superpose
from fctlnet.network import analyze_network, line_network
from fctlnet.solver import SignalPlan, solve_q

# upstream effective-green laws of the two-platoon example, 3-4 printed digits
MAIN_WEIGHTS = ["0.0476", "0.107", "0.143", "0.151", "0.138", "0.114", "0.0887", "0.0657", "0.0470", "0.0328", "0.0655"]
SIDE_WEIGHTS = ["0.255", "0.317", "0.223", "0.205"]


def main_platoon():
    return platoon_process(20, 0, 10, "0.3", MAIN_WEIGHTS, normalize=True)


def side_platoon():
    return platoon_process(20, 15, 3, "0.075", SIDE_WEIGHTS, normalize=True)


def two_platoon():
    return superpose(main_platoon(), side_platoon())


@pytest.fixture(scope="session")
def two_platoon_solution():
    return solve_q(SignalPlan(10, 10), two_platoon())


@pytest.fixture(scope="session")
def side_network_d0():
    return analyze_network(line_network(10, "0.15", 0, side_rate="1/30"))


@pytest.fixture(scope="session")
def side_network_d5():
    return analyze_network(line_network(10, "0.15", 5, side_rate="1/30"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def disk_points(rng, n, radius=0.95):
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return r * np.exp(1j * t)
