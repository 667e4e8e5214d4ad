from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import two_cycle, uniform_mdp
from envpoison.chain import (bias_and_q, diameter, gain, hajnal_alpha, hitting_times,
                             is_eps_robust_optimal, neighbor_gains, optimal_policy,
                             stationary_distribution)
from envpoison.envs import build_chain_env, chain_target
from envpoison.errors import SingularChain
from envpoison.mdp import DetPolicy, Mdp, all_policies, neighbor
from envpoison.scores import chi_table, dyn_score_tables, k_bound, mu_max

# chain4, R(s0) = -2.5, all-right target; frozen from tests/oracles.py
# (lazy power iteration, truncated bias sum, truncated first-passage sums)
CHAIN_MU = np.array([0.0475, 0.06775, 0.85975, 0.025])
CHAIN_RHO = 0.3325
CHAIN_V = np.array([-2.765, 0.235, 0.235, -3.465])
CHAIN_T = np.array([
    [0.0, 1.4760147601476015, 2.2099447513812147, 40.0],
    [21.052631578947384, 0.0, 1.1631288165164286, 40.0],
    [21.052631578947384, 14.760147601475996, 0.0, 40.0],
    [2.105263157894736, 2.804428044280439, 3.1520790927595224, 0.0],
])
CHAIN_ALPHA = Fraction(1, 10)
CHAIN_CHI_2_0 = 0.2209944751380668   # eps = 0.1, only nonzero entry


@pytest.fixture(scope="module")
def chain():
    return build_chain_env(-2.5), chain_target()


def random_mdps(n, seed, sizes=((2, 2), (3, 2), (3, 3), (4, 2))):
    rng = np.random.default_rng(seed)
    for i in range(n):
        s, a = sizes[i % len(sizes)]
        yield oracles.random_ergodic_mdp(rng, s, a), oracles.random_policy(rng, s, a), rng


class TestStationary:
    def test_uniform_kernel(self):
        assert np.allclose(stationary_distribution(uniform_mdp(5, 2), DetPolicy([0] * 5)), 0.2)

    def test_one_state(self):
        m = Mdp(np.array([[3.0]]), np.ones((1, 1, 1)))
        assert stationary_distribution(m, DetPolicy([0])).tolist() == [1.0]

    def test_chain_frozen(self, chain):
        mu = stationary_distribution(*chain)
        assert np.allclose(mu, CHAIN_MU, atol=1e-12)
        assert np.all(mu > 0) and abs(mu.sum() - 1) < 1e-12

    def test_chain_power_iteration(self, chain):
        m, t = chain
        assert np.allclose(stationary_distribution(m, t),
                           oracles.power_stationary(oracles.kernel_of(m, t.actions)), atol=1e-10)

    def test_reducible_raises(self):
        p = np.zeros((2, 1, 2))
        p[0, 0, 0] = p[1, 0, 1] = 1.0
        with pytest.raises(SingularChain):
            stationary_distribution(Mdp(np.zeros((2, 1)), p), DetPolicy([0, 0]))


class TestGain:
    def test_constant_reward(self):
        m = oracles.random_ergodic_mdp(np.random.default_rng(0), 3, 2)
        m = m.with_rewards(np.full((3, 2), 1.7))
        assert abs(gain(m, DetPolicy([0, 1, 1])) - 1.7) < 1e-12

    def test_uniform_kernel_symmetry(self):
        r = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        m = uniform_mdp(3, 2, r)
        assert abs(gain(m, DetPolicy([1, 0, 0])) - 2 / 3) < 1e-12

    def test_chain_frozen(self, chain):
        assert abs(gain(*chain) - CHAIN_RHO) < 1e-12

    def test_chain_monte_carlo(self, chain):
        m, t = chain
        k = oracles.kernel_of(m, t.actions)
        mean, se = oracles.mc_gain(k, m.rewards[:, 1], 400_000, np.random.default_rng(7))
        assert abs(mean - gain(m, t)) < 3 * se


class TestBias:
    def test_constant_reward_zero(self):
        m = uniform_mdp(3, 2, np.full((3, 2), 2.0))
        st_ = bias_and_q(m, DetPolicy([0, 1, 0]))
        assert np.allclose(st_.bias_v, 0) and np.allclose(st_.q, 0)

    def test_one_state(self):
        m = Mdp(np.array([[0.7]]), np.ones((1, 1, 1)))
        st_ = bias_and_q(m, DetPolicy([0]))
        assert st_.gain == pytest.approx(0.7) and st_.bias_v.tolist() == [0.0]

    def test_chain_frozen(self, chain):
        st_ = bias_and_q(*chain)
        assert np.allclose(st_.bias_v, CHAIN_V, atol=1e-9)

    def test_truncated_sum_oracle(self):
        rng = np.random.default_rng(3)
        m = oracles.random_ergodic_mdp(rng, 3, 2)
        pi = DetPolicy([1, 0, 1])
        assert np.allclose(bias_and_q(m, pi).bias_v, oracles.truncated_bias(m, pi.actions),
                           atol=1e-9)

    def test_normalisation_and_q_diagonal(self):
        for m, pi, _ in random_mdps(50, 11):
            st_ = bias_and_q(m, pi)
            assert abs(st_.stationary @ st_.bias_v) < 1e-8
            assert np.abs(st_.q[np.arange(m.n_states), pi.actions] - st_.bias_v).max() < 1e-8
            r = m.rewards[np.arange(m.n_states), pi.actions]
            assert abs(st_.stationary @ r - st_.gain) < 1e-12


class TestHitting:
    def test_two_cycle(self):
        t = hitting_times(two_cycle(), DetPolicy([0, 0]))
        assert t.tolist() == [[0.0, 1.0], [1.0, 0.0]]
        assert diameter(two_cycle(), DetPolicy([0, 0])) == 1.0

    def test_uniform_kernel(self):
        t = hitting_times(uniform_mdp(4, 1), DetPolicy([0] * 4))
        assert np.allclose(t[~np.eye(4, dtype=bool)], 4.0)
        assert diameter(uniform_mdp(4, 1), DetPolicy([0] * 4)) == pytest.approx(4.0)

    def test_chain_frozen(self, chain):
        t = hitting_times(*chain)
        assert np.allclose(t, CHAIN_T, atol=1e-9)
        assert np.all(np.diag(t) == 0)
        assert diameter(*chain) == pytest.approx(40.0, abs=1e-9)

    def test_chain_monte_carlo(self, chain):
        m, t = chain
        k = oracles.kernel_of(m, t.actions)
        rng = np.random.default_rng(5)
        for i, j in [(0, 3), (2, 0), (3, 1)]:
            mean, se = oracles.mc_first_passage(k, i, j, 100_000, rng)
            assert abs(mean - CHAIN_T[i, j]) < 3.5 * se

    def test_truncated_oracle_random(self):
        for m, pi, _ in random_mdps(10, 21):
            k = oracles.kernel_of(m, pi.actions)
            assert np.allclose(hitting_times(m, pi), oracles.truncated_hitting(k), atol=1e-8)


class TestAlpha:
    def test_identical_rows(self):
        assert hajnal_alpha(uniform_mdp(3, 2)) == pytest.approx(1.0)

    def test_disjoint_rows(self):
        assert hajnal_alpha(two_cycle()) == 0.0

    def test_chain_exact(self, chain):
        exact = oracles.exact_alpha(chain[0].transitions)
        assert abs(exact - CHAIN_ALPHA) < Fraction(1, 10**15)
        assert abs(hajnal_alpha(chain[0]) - float(exact)) < 1e-15

    @given(st.floats(0.01, 1.0), st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_uniform_component_lower_bound(self, gamma, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(3), size=(3, 2))
        p = (1 - gamma) * p + gamma / 3
        assert hajnal_alpha(Mdp(np.zeros((3, 2)), p)) >= gamma - 1e-12


class TestRobustOptimality:
    def test_single_action_vacuous(self):
        m = Mdp(np.zeros((3, 1)), np.full((3, 1, 3), 1 / 3))
        assert is_eps_robust_optimal(m, DetPolicy([0, 0, 0]), 10.0)

    def test_optimal_policy_matches_exhaustive(self):
        for m, _, _ in random_mdps(30, 31, sizes=((4, 2), (3, 3))):
            gains = oracles.all_gains(m)
            pi = optimal_policy(m)
            assert gains[tuple(pi.actions.tolist())] >= max(gains.values()) - 1e-10

    def test_optimal_single_action(self):
        m = Mdp(np.zeros((2, 1)), np.full((2, 1, 2), 0.5))
        assert optimal_policy(m).actions.tolist() == [0, 0]

    def test_action_only_reward(self):
        p = np.tile(np.array([0.3, 0.7]), (2, 3, 1))
        r = np.tile(np.array([0.1, 0.9, 0.4]), (2, 1))
        assert optimal_policy(Mdp(r, p)).actions.tolist() == [1, 1]

    def test_neighbor_test_vs_brute_force(self):
        for m, pi, _ in random_mdps(40, 41):
            gains = oracles.all_gains(m)
            for eps in (0.0, 0.05, 0.2):
                assert is_eps_robust_optimal(m, pi, eps) == \
                    oracles.brute_robust(m, pi.actions, eps, gains=gains)

    def test_optimal_policy_is_zero_robust(self):
        for m, _, _ in random_mdps(20, 51):
            assert is_eps_robust_optimal(m, optimal_policy(m), 0.0)


class TestIdentities:
    def test_pairwise_gain_difference(self):
        # rho(pi) - rho(pi') = sum_s mu'(s) (Q_pi(s, pi(s)) - Q_pi(s, pi'(s)))
        for m, pi, rng in random_mdps(60, 61):
            other = oracles.random_policy(rng, m.n_states, m.n_actions)
            a, b = bias_and_q(m, pi), bias_and_q(m, other)
            idx = np.arange(m.n_states)
            rhs = b.stationary @ (a.q[idx, pi.actions] - a.q[idx, other.actions])
            assert abs((a.gain - b.gain) - rhs) < 1e-8

    def test_neighbor_gain_difference(self):
        for m, pi, _ in random_mdps(40, 71):
            a = bias_and_q(m, pi)
            for (s, act), (g, mu_s) in neighbor_gains(m, pi).items():
                assert abs((a.gain - g) - mu_s * (a.q[s, pi[s]] - a.q[s, act])) < 1e-8
                nb = neighbor(pi, s, act)
                assert abs(g - oracles.power_gain(m, nb.actions)) < 1e-10


class TestChi:
    def test_target_entries_zero(self, chain):
        chi = chi_table(*chain, 0.3)
        assert np.all(chi[np.arange(4), chain[1].actions] == 0)

    def test_already_robust_zero(self):
        for m, _, _ in random_mdps(10, 81):
            assert np.all(chi_table(m, optimal_policy(m), 0.0) == 0)

    def test_chain_frozen(self, chain):
        chi = chi_table(*chain, 0.1)
        expect = np.zeros((4, 2))
        expect[2, 0] = CHAIN_CHI_2_0
        assert np.allclose(chi, expect, atol=1e-10)

    def test_chain_power_oracle(self, chain):
        m, t = chain
        gains = oracles.all_gains(m)
        rho = gains[tuple(t.actions.tolist())]
        chi = chi_table(m, t, 0.1)
        for s in range(4):
            nb = neighbor(t, s, 0)
            mu = oracles.power_stationary(oracles.kernel_of(m, nb.actions))
            assert chi[s, 0] == pytest.approx(max(0, (gains[tuple(nb.actions)] - rho + 0.1)
                                                  / mu[s]), abs=1e-10)


class TestScoreTables:
    def test_lambda_zero_without_chi(self):
        m = build_chain_env(-2.5)
        tab = dyn_score_tables(m, optimal_policy(m), 0.0, 1e-4)
        assert np.all(tab.chi == 0) and np.all(tab.lam == 0)

    def test_u_diagonal_and_span(self, chain):
        tab = dyn_score_tables(*chain, 0.1, 1e-4)
        assert np.allclose(np.diag(tab.u), tab.bias_v)
        assert tab.v_span >= 0
        assert np.allclose(tab.u, CHAIN_V[None, :] + 0.1 * CHAIN_T.T
                           - np.diag(np.diag(0.1 * CHAIN_T.T)), atol=1e-8)

    def test_ingredients_against_oracles(self, chain):
        m, t = chain
        tab = dyn_score_tables(m, t, 0.1, 1e-4)
        assert np.allclose(tab.bias_v, CHAIN_V, atol=1e-9)
        assert np.allclose(tab.hitting, CHAIN_T, atol=1e-9)
        assert tab.diameter == pytest.approx(40.0)
        assert tab.alpha == pytest.approx(0.1)
        # C for the single nonzero-chi pair recomputed by hand
        s, a = 2, 0
        u = tab.u[s]
        c = (m.rewards[s, 1] + m.transitions[s, 1] @ CHAIN_V - m.rewards[s, a]
             - (1 - 1e-4) * u.min() - 1e-4 * m.transitions[s, a] @ u)
        assert tab.c_feas[s, a] == pytest.approx(c, abs=1e-9)
        assert np.all(np.isinf(tab.c_feas[np.arange(4), t.actions]))

    def test_mu_max_and_k_bound(self, chain):
        assert k_bound(0, 0.5, 0.3, 0) == 0
        assert k_bound(10, 1, 1, 0) == 10
        m, t = chain
        mm = mu_max(m, t)
        best = max(oracles.power_stationary(oracles.kernel_of(m, neighbor(t, s, 0).actions))[s]
                   for s in range(4))
        assert mm == pytest.approx(best, abs=1e-10)
        assert k_bound(100.0, 0.1, mm, 3.465) == pytest.approx(mm / 0.1 * (100 + 6.93))


def test_opts_are_policies():
    for pi in all_policies(2, 2):
        assert len(pi) == 2
