import numpy as np
import pytest

from fctlnet.arrivals import ONE_SLOT, ZERO_SLOT, mean_per_slot, poisson_process
from fctlnet.errors import FCTLError, InstabilityError
from fctlnet.network import (
    Link,
    NetworkSpec,
    Node,
    analyze_network,
    derived_input_report,
    embed_output,
    line_network,
    rotate,
)
from fctlnet.output import output_mean_per_slot, output_pgf
from fctlnet.solver import SignalPlan, solve_q

D0_DECOMP = [0.493, 0.231, 0.260, 0.292, 0.333, 0.386, 0.464, 0.588, 0.810, 1.323]
D5_DECOMP = [0.493, 0.359, 1.159, 0.819, 1.534, 1.273, 1.920, 1.835, 2.478, 2.858]
MAIN2_PLATOONS = ["0.0052", "0.015", "0.028", "0.039", "0.048", "0.054", "0.057", "0.058", "0.057", "0.055", "0.583"]


@pytest.fixture(scope="module")
def upstream():
    return output_pgf(solve_q(SignalPlan(10, 10), poisson_process(20, "0.15")))


def _targets(p):
    """Slots (0-based) that can receive arrivals."""
    return [i for i in range(p.c) if any(s.slots[i] != ZERO_SLOT for s in p.scenarios)]


def test_embed_identity(upstream):
    e = embed_output(upstream, 0, 0, 10)
    assert [s.slots for s in e.scenarios] == [s.slots for s in upstream.process.scenarios]


def test_embed_travel_time(upstream):
    e = embed_output(upstream, 5, 0, 20)
    assert _targets(e) == list(range(5, 15))
    assert _targets(embed_output(upstream, 20, 0, 20)) == list(range(10))
    # side flow: green after 15 red slots, 5 slots of travel wraps into slots 1-3
    side = output_pgf(solve_q(SignalPlan(3, 17), poisson_process(20, "1/30")))
    assert _targets(embed_output(side, 5, 15, 20)) == [0, 1, 2]


def test_rotate_roundtrip():
    p = embed_output(output_pgf(solve_q(SignalPlan(3, 17), poisson_process(20, "0.1"))), 0, 15, 20)
    assert _targets(rotate(p, 15)) == [0, 1, 2]
    assert rotate(rotate(p, 15), 5).scenarios == p.scenarios


def test_single_intersection_equals_solver():
    spec = NetworkSpec((Node("a", SignalPlan(10, 10), poisson_process(20, "0.3")),), 20)
    sol = analyze_network(spec)
    direct = solve_q(SignalPlan(10, 10), poisson_process(20, "0.3"))
    assert np.allclose(sol["a"].solution.q, direct.q, atol=1e-15)


def test_side_traffic_d0(side_network_d0):
    got = [side_network_d0[f"main{i}"].solution.mean_xbar for i in range(1, 11)]
    assert np.allclose(got, D0_DECOMP, atol=5e-3)


def test_side_traffic_d5(side_network_d5):
    got = [side_network_d5[f"main{i}"].solution.mean_xbar for i in range(1, 11)]
    assert np.allclose(got, D5_DECOMP, atol=5e-3)


def test_load_increases_linearly(side_network_d0, side_network_d5):
    for sol in (side_network_d0, side_network_d5):
        for i in range(1, 11):
            rho = mean_per_slot(sol[f"main{i}"].arrivals).sum() / 10
            assert abs(rho - (0.3 + (i - 1) / 15)) < 1e-9
            assert sol[f"main{i}"].rho == pytest.approx(rho, abs=1e-12)


def test_flow_conservation(side_network_d5):
    sol = side_network_d5
    spec = sol.spec
    for node in spec.nodes:
        if not node.inputs:
            continue
        parents = sum(output_mean_per_slot(sol[l.source].output).sum() for l in node.inputs)
        assert abs(mean_per_slot(sol[node.name].arrivals).sum() - parents) < 1e-9


def test_green_wave():
    sol = analyze_network(line_network(10, "0.45", 0))
    for i in range(2, 11):
        assert np.all(np.abs(sol[f"main{i}"].solution.mean_queue) < 1e-9)


def test_platoon_law_at_second_intersection():
    sol = analyze_network(line_network(10, "0.45", 5))
    p = sol["main2"].arrivals
    sizes = np.zeros(11)
    for s in p.scenarios:
        sizes[sum(1 for d in s.slots if d == ONE_SLOT)] += s.weight
    for got, printed in zip(sizes, MAIN2_PLATOONS):
        tol = 0.5 * 10.0 ** -len(printed.split(".")[1]) + 1e-9
        assert abs(got - float(printed)) <= tol
    report = derived_input_report(sol, "main2")
    assert report.startswith("queue main2")
    assert sum(float(line.split()[0][2:]) for line in report.splitlines()[1:]) == pytest.approx(1.0, abs=1e-5)


def test_first_intersection_input_is_external(side_network_d0):
    assert side_network_d0["main1"].arrivals == poisson_process(20, "0.15")


def test_epsilon_weight_keeps_results():
    spec = line_network(10, "0.15", 5, side_rate="1/30")
    sol = analyze_network(spec, eps_weight=1e-12)
    got = [sol[f"main{i}"].solution.mean_xbar for i in range(1, 11)]
    assert np.allclose(got, D5_DECOMP, atol=5e-3)


def test_cycle_rejected():
    a = Node("a", SignalPlan(2, 2), poisson_process(4, "0.1"), (Link("b"),))
    b = Node("b", SignalPlan(2, 2), None, (Link("a"),))
    with pytest.raises(FCTLError):
        NetworkSpec((a, b), 4).order()


def test_instability_reports_queue():
    spec = line_network(3, "0.35", 0, side_rate="0.5")
    with pytest.raises(InstabilityError) as info:
        analyze_network(spec)
    assert info.value.queue is not None and info.value.rho >= 1


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec((Node("a", SignalPlan(2, 3), poisson_process(5, "0.1")),), 4)
    with pytest.raises(ValueError):
        NetworkSpec((Node("a", SignalPlan(2, 2), None, (Link("zz"),)),), 4)
    with pytest.raises(ValueError):
        Node("a", SignalPlan(2, 2))
    with pytest.raises(ValueError):
        Link("a", -1)
