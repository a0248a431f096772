import math

import numpy as np
import pytest

from cbtsm.kernel.lp import solve_lp, solve_lp_arrays
from cbtsm.kernel.model import MilpModel, verify_farkas

from _oracles import lp_by_vertex_enumeration


def build(sense, bounds, rows, obj):
    m = MilpModel(sense=sense)
    for name, lo, hi in bounds:
        m.add_var(name, lo, hi)
    for coeffs, s, rhs in rows:
        m.add_row(coeffs, s, rhs)
    m.set_objective(obj)
    return m


def test_single_row_lp_with_dual():
    m = build("max", [("x", 0, math.inf), ("y", 0, math.inf)],
              [({0: 1, 1: 1}, "<=", 1)], {0: 1, 1: 1})
    sol = solve_lp(m)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)
    assert sol.duals[0] == pytest.approx(1.0)


def test_infeasible_box_has_valid_certificate():
    m = build("min", [("x", -math.inf, math.inf)],
              [({0: 1}, ">=", 1), ({0: 1}, "<=", 0)], {0: 1})
    sol = solve_lp(m)
    assert sol.status == "infeasible"
    A, senses, b, c, lb, ub = m.dense()
    margin = verify_farkas(A, senses, b, lb, ub, sol.farkas_ray)
    assert margin > 1e-7
    assert float(sol.farkas_ray @ b) + sol.farkas_bound_term > 1e-7


def test_unbounded_detected():
    m = build("max", [("x", 0, math.inf)], [], {0: 1})
    assert solve_lp(m).status == "unbounded"


def test_free_variable_equality():
    m = build("min", [("x", -math.inf, math.inf), ("y", -math.inf, math.inf)],
              [({0: 1, 1: 1}, "=", 3), ({0: 1, 1: -1}, "=", 1)], {0: 1, 1: 2})
    sol = solve_lp(m)
    assert sol.status == "optimal"
    assert sol.x == pytest.approx([2.0, 1.0])
    assert sol.objective == pytest.approx(4.0)


def _random_lp(rng, n=10, m=10):
    A = np.round(rng.uniform(-5, 5, size=(m, n)), 3)
    b = np.round(rng.uniform(-10, 10, size=m), 3)
    c = np.round(rng.uniform(-5, 5, size=n), 3)
    senses = rng.choice([-1, 0, 1], size=m, p=[0.45, 0.1, 0.45]).astype(np.int8)
    lb = np.zeros(n)
    ub = np.full(n, 3.0)
    return A, senses, b, c, lb, ub


@pytest.mark.parametrize("seed", range(40))
def test_random_lps_match_vertex_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    A, senses, b, c, lb, ub = _random_lp(rng, n=5, m=5)
    sense = "min" if seed % 2 else "max"
    sol = solve_lp_arrays(A, senses, b, c, lb, ub, sense)
    status, obj = lp_by_vertex_enumeration(A, senses, b, c, lb, ub, sense)
    assert sol.status == status
    if status == "optimal":
        assert sol.objective == pytest.approx(obj, abs=1e-6)
        # dual identity: objective = duals . rhs + reduced_costs . x
        assert sol.objective == pytest.approx(
            float(sol.duals @ b) + float(sol.reduced_costs @ sol.x), abs=1e-6)
    else:
        margin = verify_farkas(A, senses, b, lb, ub, sol.farkas_ray)
        assert margin > 1e-7


@pytest.mark.parametrize("seed", [5, 6])
def test_ten_by_ten_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = m = 10
    A = np.round(rng.uniform(0.1, 4, size=(m, n)), 3)
    b = np.round(rng.uniform(5, 15, size=m), 3)
    c = np.round(rng.uniform(0.1, 5, size=n), 3)
    senses = np.full(m, -1, dtype=np.int8)
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    _, oracle_obj = lp_by_vertex_enumeration(A, senses, b, c, lb, ub, "max")
    sol = solve_lp_arrays(A, senses, b, c, lb, ub, "max")
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(oracle_obj, abs=1e-6)


def test_primal_feasibility_and_slackness_on_random_instances():
    rng = np.random.default_rng(77)
    for _ in range(40):
        A, senses, b, c, lb, ub = _random_lp(rng, n=8, m=6)
        sol = solve_lp_arrays(A, senses, b, c, lb, ub, "min")
        if sol.status != "optimal":
            continue
        act = A @ sol.x
        for i in range(len(b)):
            if senses[i] == -1:
                assert act[i] <= b[i] + 1e-6
                # complementary slackness on rows
                assert abs(sol.duals[i]) < 1e-6 or act[i] >= b[i] - 1e-6
            elif senses[i] == 1:
                assert act[i] >= b[i] - 1e-6
                assert abs(sol.duals[i]) < 1e-6 or act[i] <= b[i] + 1e-6
        assert np.all(sol.x >= lb - 1e-6) and np.all(sol.x <= ub + 1e-6)
