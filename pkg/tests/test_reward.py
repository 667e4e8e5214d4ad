import numpy as np
import pytest

import oracles
from envpoison.attacks.reward import (GENERAL, NONTARGET, attack_reward_general,
                                      attack_reward_nontarget, reward_bounds,
                                      success_constraints)
from envpoison.chain import hajnal_alpha, optimal_policy
from envpoison.envs import build_chain_env, chain_target
from envpoison.errors import DomainError
from envpoison.lp import lp_norm
from envpoison.mdp import Mdp
from envpoison.scores import chi_table
from test_chain import CHAIN_CHI_2_0


def random_cases(n, seed):
    rng = np.random.default_rng(seed)
    for i in range(n):
        s, a = [(2, 2), (3, 2), (3, 3), (4, 2)][i % 4]
        yield oracles.random_ergodic_mdp(rng, s, a), oracles.random_policy(rng, s, a), \
            float(rng.choice([0.0, 0.05, 0.2]))


class TestNonTarget:
    def test_zero_chi_is_identity(self):
        m = build_chain_env(-2.5)
        pi = optimal_policy(m)
        res = attack_reward_nontarget(m, pi, 0.0)
        assert res.cost == 0 and np.array_equal(res.r_hat, m.rewards)

    def test_chain_cost_matches_chi_oracle(self):
        m, t = build_chain_env(-2.5), chain_target()
        for p in (1, 2, np.inf):
            res = attack_reward_nontarget(m, t, 0.1, p)
            assert res.mode == NONTARGET
            assert res.cost == pytest.approx(CHAIN_CHI_2_0, abs=1e-10)

    def test_target_entries_bit_identical(self):
        for m, pi, eps in random_cases(20, 1):
            res = attack_reward_nontarget(m, pi, eps)
            idx = np.arange(m.n_states)
            assert np.array_equal(res.r_hat[idx, pi.actions], m.rewards[idx, pi.actions])

    def test_post_attack_brute_force(self):
        for m, pi, eps in random_cases(30, 2):
            res = attack_reward_nontarget(m, pi, eps)
            assert oracles.brute_robust(res.mdp_hat, pi.actions, eps, tol=1e-7)

    def test_satisfies_general_constraints(self):
        for m, pi, eps in random_cases(20, 3):
            g, h, _ = success_constraints(m, pi, eps)
            res = attack_reward_nontarget(m, pi, eps)
            assert np.all(g @ res.r_hat.ravel() <= h + 1e-9)


class TestGeneral:
    def test_already_robust_zero_cost(self):
        m = build_chain_env(-2.5)
        res = attack_reward_general(m, optimal_policy(m), 0.0)
        assert res.cost == 0 and np.array_equal(res.r_hat, m.rewards)

    def test_p0_rejected(self):
        with pytest.raises(DomainError):
            attack_reward_general(build_chain_env(0.0), chain_target(), 0.1, 0)

    @pytest.mark.parametrize("p", [1, 2, np.inf])
    def test_sandwich_and_dominance(self, p):
        for m, pi, eps in random_cases(24, 4):
            res = attack_reward_general(m, pi, eps, p)
            chi = chi_table(m, pi, eps)
            low = 0.5 * float(oracles.exact_alpha(m.transitions)) * chi.max()
            assert res.mode == GENERAL
            assert low - 1e-6 <= res.cost <= lp_norm(chi, p) + 1e-6
            assert res.cost <= attack_reward_nontarget(m, pi, eps, p).cost + 1e-6
            assert oracles.brute_robust(res.mdp_hat, pi.actions, eps, tol=1e-7)

    def test_chain_inf_cost_against_grid_search(self):
        # rank-one family: lower the non-target reward at s2 by x and raise
        # the target reward there by y; a grid over (x, y) upper-bounds the general optimum
        m, t = build_chain_env(-2.5), chain_target()
        res = attack_reward_general(m, t, 0.1, np.inf)
        # stationary laws do not depend on rewards: compute them once
        laws = {acts: oracles.power_stationary(oracles.kernel_of(m, acts))
                for acts in oracles.all_gains(m)}
        best = np.inf
        for x in np.linspace(0, CHAIN_CHI_2_0, 81):
            for y in np.linspace(0, CHAIN_CHI_2_0, 81):
                r = m.rewards.copy()
                r[2, 0] -= x
                r[2, 1] += y
                gains = {k: float(mu @ r[np.arange(4), list(k)]) for k, mu in laws.items()}
                if oracles.brute_robust(Mdp(r, m.transitions), t.actions, 0.1, tol=1e-12,
                                        gains=gains):
                    best = min(best, max(x, y))
        assert res.cost <= best + 1e-9
        assert res.cost <= CHAIN_CHI_2_0 + 1e-9
        assert res.cost >= res.lower_bound - 1e-9

    def test_l2_reports_kkt(self):
        res = attack_reward_general(build_chain_env(-2.5), chain_target(), 0.5, 2)
        assert res.info["kkt_residual"] < 1e-6


class TestBounds:
    def test_zero_chi(self):
        m = build_chain_env(-2.5)
        assert reward_bounds(m, optimal_policy(m), 0.0, np.inf) == (0.0, 0.0)

    def test_zero_alpha_lower_zero(self):
        p = np.zeros((2, 2, 2))
        p[0, :, 1] = p[1, :, 0] = 1.0
        p[0, 1] = [0.5, 0.5]
        m = Mdp(np.array([[1.0, 0.0], [0.0, 0.0]]), p)
        assert hajnal_alpha(m) == 0.0
        from envpoison.mdp import DetPolicy
        assert reward_bounds(m, DetPolicy([1, 0]), 0.1, 1)[0] == 0.0

    def test_upper_monotone_in_r_s0(self):
        t = chain_target()
        ups = [reward_bounds(build_chain_env(r), t, 0.1, np.inf)[1]
               for r in np.linspace(-5, 5, 21)]
        # raising R(s0) makes the left detours more attractive, so the NT
        # bound can only grow along this sweep
        assert all(b >= a - 1e-12 for a, b in zip(ups, ups[1:]))
