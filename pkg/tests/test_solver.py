import itertools

import numpy as np
import pytest

from fctlnet.arrivals import (
    ArrivalProcess,
    SlotDistribution,
    independent_process,
    poisson_process,
    superpose,
    zero_process,
)
from fctlnet.errors import InstabilityError
from fctlnet.solver import SignalPlan, solve_q, tail_table, zeta, zeta_prime_one

from conftest import disk_points
from oracles import deterministic_process, markov_distributions, random_instance

H = 1e-6


@pytest.mark.parametrize("seed", range(24))
def test_markov_oracle(seed):
    g, c, scen = random_instance(seed)
    p = deterministic_process(scen, c)
    sol = solve_q(SignalPlan(g, c - g), p)
    pi, slots = markov_distributions(scen, g)
    assert np.max(np.abs(sol.x0_pmf(pi.size) - pi)) < 1e-8
    n = 40
    assert np.max(np.abs(sol.q - pi[:g])) < 1e-8
    assert np.max(np.abs(sol.pmf(g, n) - slots[g - 1, :n])) < 1e-8
    assert np.max(np.abs(sol.pmf("bar", n) - slots[:, :n].mean(axis=0))) < 1e-8
    means = np.arange(pi.size) @ slots.T
    assert np.allclose(sol.mean_queue[1:], means, atol=1e-8)


def test_bernoulli_example():
    # g=2, c=4, i.i.d. Bernoulli(0.3) slots
    scen = [(float(np.prod([0.3 if a else 0.7 for a in y])), y) for y in itertools.product((0, 1), repeat=4)]
    sol = solve_q(SignalPlan(2, 2), deterministic_process(scen, 4))
    pi, _ = markov_distributions(scen, 2)
    assert np.allclose(sol.q, pi[:2], atol=1e-8)


def test_classical_reduction(rng):
    lam, g, c = 0.45, 10, 20
    sol = solve_q(SignalPlan(g, c - g), poisson_process(c, "0.45"))
    empty = [sol.prob_empty(j - 1) for j in range(1, g + 1)]
    for z in disk_points(rng, 20):
        Y = np.exp(lam * (z - 1))
        num = (1 - Y / z) * sum(empty[j - 1] * z**j * Y ** (c - j) for j in range(1, g + 1))
        assert abs(sol.x0(z) - num / (z**g - Y**c)) < 1e-9


def test_independent_reduction(rng):
    slots = [SlotDistribution(0, "0.6"), SlotDistribution(0, "1.1"), SlotDistribution(0, "0.2"),
             SlotDistribution(0, 0), SlotDistribution(0, "0.9"), SlotDistribution(0, "0.5"),
             SlotDistribution(0, "0.05"), SlotDistribution(0, "1/3")]
    g = 5
    sol = solve_q(SignalPlan(g, 3), independent_process(slots))
    pg = sol.effective_green
    for z in disk_points(rng, 20):
        Yi = np.array([z**d.shift * np.exp(float(d.rate) * (z - 1)) for d in slots])
        num = (1 - pg[g]) * z**g * np.prod(Yi[g:])
        num -= sum(pg[j] * z**j * np.prod(Yi[j:]) for j in range(g))
        assert abs(sol.x0(z) - num / (z**g - np.prod(Yi))) < 1e-9


def test_zero_arrivals():
    sol = solve_q(SignalPlan(3, 2), zero_process(5))
    assert np.array_equal(sol.q, [1.0, 0.0, 0.0])
    assert sol.x0(0.3) == 1.0
    assert all(sol.xk(k, 0.4 + 0.1j) == 1.0 for k in range(1, 6))
    assert sol.xbar(-0.2) == pytest.approx(1.0)
    assert sol.mean_x0 == 0.0
    assert np.all(sol.mean_queue == 0.0)
    for v in tail_table(sol).values():
        assert np.all(v == 0.0)


def test_zeta_zero_process():
    sol = solve_q(SignalPlan(4, 2), zero_process(6))
    z = 0.3 + 0.5j
    assert zeta(sol, 0, z) == pytest.approx(z**4 - 1, abs=1e-15)


def test_unstable():
    with pytest.raises(InstabilityError):
        solve_q(SignalPlan(2, 2), poisson_process(4, "0.5"))


def test_cycle_mismatch():
    with pytest.raises(ValueError):
        solve_q(SignalPlan(2, 2), poisson_process(5, "0.1"))


def test_xk_range(two_platoon_solution):
    with pytest.raises(ValueError):
        two_platoon_solution.xk(0, 0.5)
    with pytest.raises(ValueError):
        two_platoon_solution.xk(21, 0.5)


def _instances(two_platoon_solution):
    yield two_platoon_solution
    yield solve_q(SignalPlan(10, 10), poisson_process(20, "0.45"))
    yield solve_q(SignalPlan(3, 17), poisson_process(20, "0.075"))
    yield solve_q(SignalPlan(4, 3), superpose(poisson_process(7, "0.2"), ArrivalProcess.from_weighted(
        7, [(0.4, [SlotDistribution(1, 0)] * 2 + [SlotDistribution(0, 0)] * 5),
            (0.6, [SlotDistribution(0, "0.3")] * 7)])))


def test_structural_identities(two_platoon_solution):
    for sol in _instances(two_platoon_solution):
        assert sol.residual < 1e-9
        for l in range(sol.g):
            assert abs(zeta(sol, l, 1.0)) < 1e-12
        num = [sum(sol.q[l] * zeta(sol, l, z) for l in range(sol.g)) for z in sol.roots]
        assert max(map(abs, num), default=0.0) < 1e-8
        assert abs(sol.x0(1.0) - 1) < 1e-10
        assert abs(sol.xbar(1.0) - 1) < 1e-10
        for k in range(1, sol.c + 1):
            assert abs(sol.xk(k, 1.0) - 1) < 1e-10
        for z in (0.3 + 0.4j, -0.7, 0.95j):
            assert abs(sol.xk(sol.c, z) - sol.x0(z)) < 1e-10


def test_zeta_prime_matches_difference(two_platoon_solution):
    sol = two_platoon_solution
    for l in range(sol.g):
        fd = (zeta(sol, l, 1 + H) - zeta(sol, l, 1 - H)).real / (2 * H)
        assert zeta_prime_one(sol, l) == pytest.approx(fd, abs=1e-6)


def test_means_match_derivatives(two_platoon_solution):
    for sol in _instances(two_platoon_solution):
        fd0 = (sol.x0(1 + H) - sol.x0(1 - H)).real / (2 * H)
        assert abs(sol.mean_x0 - fd0) < 1e-6
        for k in range(1, sol.c + 1):
            fd = (sol.xk(k, 1 + H) - sol.xk(k, 1 - H)).real / (2 * H)
            assert abs(sol.mean_queue[k] - fd) < 1e-6


def test_red_recursion(two_platoon_solution):
    sol = two_platoon_solution
    m = sol.mean_queue
    ey = sol.mean_arrivals
    for k in range(sol.g, sol.c):
        assert m[k] - m[k + 1] == pytest.approx(-ey[k], abs=1e-12)


def test_single_poisson_queue_mean():
    sol = solve_q(SignalPlan(10, 10), poisson_process(20, "0.15"))
    assert sol.mean_xbar == pytest.approx(0.493, abs=5e-4)


def test_two_platoon_table(two_platoon_solution):
    t = tail_table(two_platoon_solution)
    assert np.allclose(t["X0"], [0.829, 0.547, 0.302, 0.075, 0.036, 0.015], atol=1e-3)
    assert np.allclose(t["X10"], [0.159, 0.089, 0.042, 0.014, 0.006, 0.002], atol=1e-3)
    assert np.allclose(t["Xbar"], [0.496, 0.294, 0.146, 0.042, 0.019, 0.008], atol=1e-3)
    assert 1 - two_platoon_solution.q[0] == pytest.approx(0.829, abs=1e-3)
