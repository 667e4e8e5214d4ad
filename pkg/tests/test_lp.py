import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

import oracles
from envpoison.errors import DomainError
from envpoison.lp import (INFEASIBLE, UNBOUNDED, LinearProgram, lp_norm,
                          min_lp_norm_to_point, parse_p, solve_lp)


def test_lower_bound_only():
    rep = solve_lp(LinearProgram([1.0], ineq_lhs=[[-1.0]], ineq_rhs=[-3.0]))
    assert rep.ok and rep.solution[0] == pytest.approx(3.0)


def test_trivially_infeasible():
    rep = solve_lp(LinearProgram([0.0], ineq_lhs=[[1.0]], ineq_rhs=[-1.0]))
    assert rep.status == INFEASIBLE


def test_unbounded():
    assert solve_lp(LinearProgram([-1.0, 0.0], ineq_lhs=[[0.0, 1.0]], ineq_rhs=[1])).status \
        == UNBOUNDED


def test_equality_and_free_variables():
    # min x + 2y  s.t.  x + y = 1, x - y <= 3, x, y free in [-5, 5]
    lp = LinearProgram([1.0, 2.0], eq_lhs=[[1, 1]], eq_rhs=[1], ineq_lhs=[[1, -1]],
                       ineq_rhs=[3], lower=-5, upper=5)
    rep = solve_lp(lp)
    assert rep.ok
    assert np.allclose(rep.solution, [2.0, -1.0])


def test_beale_cycling_example_terminates():
    # classic instance on which Dantzig's rule cycles without anti-cycling
    c = np.array([-0.75, 150, -0.02, 6])
    a = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    b = np.array([0, 0, 1])
    rep = solve_lp(LinearProgram(c, ineq_lhs=a, ineq_rhs=b))
    assert rep.ok and rep.objective == pytest.approx(-0.05)


@pytest.mark.parametrize("seed", range(4))
def test_twenty_variables_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 1.0, size=(6, 20))
    b = rng.uniform(1.0, 3.0, size=6)
    c = rng.normal(size=20)
    x_ref, v_ref = oracles.vertex_lp_standard(c, a, b)
    rep = solve_lp(LinearProgram(c, ineq_lhs=a, ineq_rhs=b))
    assert rep.ok
    assert rep.objective == pytest.approx(v_ref, abs=1e-9)
    assert rep.max_violation < 1e-9


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_small_boxed_vs_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    a = rng.normal(size=(3, n))
    b = rng.normal(size=3)
    eq = rng.normal(size=(1, n)) if rng.random() < 0.5 else None
    beq = rng.normal(size=1) if eq is not None else None
    c = rng.normal(size=n)
    status, _, v = oracles.vertex_lp(c, a, b, eq, beq, -np.ones(n) * 2, np.ones(n) * 2)
    rep = solve_lp(LinearProgram(c, eq, beq, a, b, -2.0, 2.0))
    if status == "infeasible":
        assert rep.status == INFEASIBLE
    else:
        assert rep.ok and rep.objective == pytest.approx(v, abs=1e-8)


def test_against_highs():
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = rng.normal(size=(8, 10))
        b = rng.uniform(0.5, 2, size=8)
        c = rng.normal(size=10)
        ref = linprog(c, a, b, bounds=[(-3, 3)] * 10, method="highs")
        rep = solve_lp(LinearProgram(c, ineq_lhs=a, ineq_rhs=b, lower=-3, upper=3))
        assert rep.ok and rep.objective == pytest.approx(ref.fun, abs=1e-8)


class TestNorms:
    def test_lp_norm(self):
        v = np.array([3.0, -4.0, 0.0])
        assert lp_norm(v, 0) == 2 and lp_norm(v, 1) == 7
        assert lp_norm(v, 2) == 5 and lp_norm(v, np.inf) == 4

    def test_parse_p(self):
        assert parse_p("inf") == np.inf and parse_p("2") == 2 and parse_p(1.0) == 1
        with pytest.raises(DomainError):
            parse_p(3)

    @pytest.mark.parametrize("p", [1, 2, np.inf])
    def test_feasible_base_returned(self, p):
        cons = LinearProgram.feasibility(2, ineq_lhs=[[1, 1]], ineq_rhs=[5], lower=-np.inf)
        rep = min_lp_norm_to_point([1.0, 2.0], p, cons)
        assert rep.ok and rep.objective == 0 and rep.solution.tolist() == [1.0, 2.0]

    @pytest.mark.parametrize("p,cost", [(2, np.sqrt(2)), (1, 2.0), (np.inf, 1.0)])
    def test_half_plane(self, p, cost):
        cons = LinearProgram.feasibility(2, ineq_lhs=[[-1, -1]], ineq_rhs=[-2], lower=-np.inf)
        rep = min_lp_norm_to_point([0.0, 0.0], p, cons)
        assert rep.ok and rep.objective == pytest.approx(cost, abs=1e-7)
        if p == 2:
            assert np.allclose(rep.solution, [1, 1], atol=1e-7)

    def test_p0_rejected(self):
        with pytest.raises(DomainError):
            min_lp_norm_to_point([0.0], 0, LinearProgram.feasibility(1))

    def test_l1_matches_split_reformulation(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = 10
            g = rng.normal(size=(6, n))
            h = rng.normal(size=6) - 1
            base = rng.normal(size=n)
            cons = LinearProgram.feasibility(n, ineq_lhs=g, ineq_rhs=h, lower=-10, upper=10)
            rep = min_lp_norm_to_point(base, 1, cons)
            # independent split: variables (x, t), min sum t, |x - base| <= t
            eye = np.eye(n)
            lp = LinearProgram(np.concatenate([np.zeros(n), np.ones(n)]),
                               ineq_lhs=np.vstack([np.hstack([g, np.zeros((6, n))]),
                                                   np.hstack([eye, -eye]),
                                                   np.hstack([-eye, -eye])]),
                               ineq_rhs=np.concatenate([h, base, -base]),
                               lower=np.concatenate([np.full(n, -10), np.zeros(n)]),
                               upper=np.concatenate([np.full(n, 10), np.full(n, np.inf)]))
            ref = solve_lp(lp)
            hi = linprog(lp.objective, lp.ineq_lhs, lp.ineq_rhs,
                         bounds=list(zip(lp.lower, lp.upper)), method="highs")
            if not ref.ok:
                assert not rep.ok
                continue
            assert rep.objective == pytest.approx(ref.objective, abs=1e-6)
            assert rep.objective == pytest.approx(hi.fun, abs=1e-6)

    def test_l2_matches_active_set_enumeration(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            g = rng.normal(size=(4, 3))
            h = rng.normal(size=4) + 0.5
            base = rng.normal(size=3) * 3
            cons = LinearProgram.feasibility(3, ineq_lhs=g, ineq_rhs=h, lower=-np.inf)
            x_ref, d_ref = oracles.enum_projection(base, g, h)
            rep = min_lp_norm_to_point(base, 2, cons)
            assert rep.ok
            assert rep.objective == pytest.approx(d_ref, abs=1e-7)
            assert np.allclose(rep.solution, x_ref, atol=1e-6)

    @pytest.mark.parametrize("p", [1, np.inf])
    def test_row_scaling_invariance(self, p):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = rng.normal(size=(5, 4))
            h = rng.normal(size=5) - 0.5
            base = rng.normal(size=4)
            scale = rng.uniform(0.01, 100, size=5)
            a = min_lp_norm_to_point(base, p, LinearProgram.feasibility(
                4, ineq_lhs=g, ineq_rhs=h, lower=-5, upper=5))
            b = min_lp_norm_to_point(base, p, LinearProgram.feasibility(
                4, ineq_lhs=g * scale[:, None], ineq_rhs=h * scale, lower=-5, upper=5))
            assert a.status == b.status
            if a.ok:
                assert abs(a.objective - b.objective) <= 1e-7

    def test_l2_idempotent(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            g = rng.normal(size=(5, 4))
            h = rng.normal(size=5)
            cons = LinearProgram.feasibility(4, eq_lhs=np.ones((1, 4)), eq_rhs=[1.0],
                                             ineq_lhs=g, ineq_rhs=h, lower=-3, upper=3)
            first = min_lp_norm_to_point(rng.normal(size=4) * 4, 2, cons)
            if not first.ok:
                continue
            again = min_lp_norm_to_point(first.solution, 2, cons)
            assert np.abs(again.solution - first.solution).max() < 1e-7

    @pytest.mark.parametrize("p", [1, 2, np.inf])
    def test_nested_sets_monotone(self, p):
        rng = np.random.default_rng(10)
        for _ in range(10):
            g = rng.normal(size=(6, 3))
            h = rng.uniform(0.1, 1, size=6)
            base = rng.normal(size=3) * 3
            big = LinearProgram.feasibility(3, ineq_lhs=g[:3], ineq_rhs=h[:3], lower=-4, upper=4)
            small = LinearProgram.feasibility(3, ineq_lhs=g, ineq_rhs=h, lower=-4, upper=4)
            a = min_lp_norm_to_point(base, p, small)
            b = min_lp_norm_to_point(base, p, big)
            assert a.ok and b.ok
            assert a.objective >= b.objective - 1e-7
