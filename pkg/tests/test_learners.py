import math

import numpy as np
import pytest
from scipy import stats

import oracles
from envpoison.chain import bias_and_q, optimal_policy
from envpoison.envs import build_chain_env, chain_target
from envpoison.learners import FixedPolicyLearner, Ucrl2, UniformRandomLearner
from envpoison.mdp import Mdp
from envpoison.online import avg_miss, empirical_regret, run_online


def two_state_clear():
    p = np.array([[[0.9, 0.1], [0.2, 0.8]], [[0.7, 0.3], [0.1, 0.9]]])
    r = np.array([[0.1, 0.9], [0.2, 1.0]])
    return Mdp(r, p)


def test_fresh_learner_ties_to_lowest_action():
    lr = Ucrl2(4, 3)
    assert lr.policy.tolist() == [0, 0, 0, 0]
    assert lr.act(2) == 0


def test_first_observation_starts_new_episode():
    lr = Ucrl2(2, 2)
    assert lr.episodes == 1
    lr.observe(0, 0, 0.5, 1)
    assert lr.episodes == 2


def test_policy_constant_within_episode():
    lr = Ucrl2(3, 2)
    rng = np.random.default_rng(0)
    same_episode_steps = 0
    for _ in range(2000):
        ep, pol = lr.episodes, lr.policy.copy()
        s = int(rng.integers(3))
        a = lr.act(s)
        assert a == pol[s]
        lr.observe(s, a, float(rng.random()), int(rng.integers(3)))
        if lr.episodes == ep:
            same_episode_steps += 1
            assert np.array_equal(lr.policy, pol)
    assert same_episode_steps > 1500


def test_counts_consistent():
    m = build_chain_env(-2.5)
    lr = Ucrl2(4, 2, reward_range=1.0)
    tr = run_online(m, None, chain_target(), lr, 5000, seed=1)
    assert lr.counts_sas.sum() == 5000
    assert np.array_equal(lr.counts_sas.sum(axis=2), lr.counts_sa)
    sums = np.zeros((4, 2))
    np.add.at(sums, (tr.states, tr.actions), tr.rewards)
    assert np.allclose(sums, lr.reward_sums)


def test_learns_clear_best_action():
    m = two_state_clear()
    best = optimal_policy(m)
    freqs = []
    for seed in range(10):
        lr = Ucrl2(2, 2, reward_range=1.0)
        tr = run_online(m, None, best, lr, 100_000, seed=seed)
        freqs.append(1 - avg_miss(tr))
    assert min(freqs) >= 0.95


def test_regret_sublinear_on_chain():
    m = build_chain_env(-2.5)
    t_half = 100_000
    r1, r2 = [], []
    for seed in range(10):
        lr = Ucrl2(4, 2, reward_range=1.0)
        tr = run_online(m, None, chain_target(), lr, 2 * t_half, seed=seed)
        r1.append(empirical_regret(tr, m, t_half) / t_half)
        r2.append(empirical_regret(tr, m) / (2 * t_half))
    assert np.mean(r2) < np.mean(r1)
    assert np.mean(r1) > 0


def test_episode_count_logarithmic():
    m = build_chain_env(-2.5)
    horizon = 200_000
    lr = Ucrl2(4, 2, reward_range=1.0)
    run_online(m, None, chain_target(), lr, horizon, seed=2)
    sa = 8
    assert lr.episodes <= sa * (math.log2(horizon) + 1) + sa


def test_optimism_at_episode_start():
    m = two_state_clear()
    rho_star = bias_and_q(m, optimal_policy(m)).gain
    rng = np.random.default_rng(3)
    lr = Ucrl2(2, 2, reward_range=1.0, evi_tol_scale=0.1)
    cdf = np.cumsum(m.transitions, axis=2)
    s = 0
    checked = 0
    for _ in range(20_000):
        ep = lr.episodes
        a = lr.act(s)
        nxt = int(np.searchsorted(cdf[s, a], rng.random(), side="right"))
        lr.observe(s, a, m.rewards[s, a], nxt)
        s = nxt
        if lr.episodes > ep:
            p_hat, r_hat = lr.empirical()
            d_p, d_r = lr.radii()
            inside = (np.abs(p_hat - m.transitions).sum(axis=2) <= d_p).all() and \
                (np.abs(r_hat - m.rewards) <= d_r).all()
            if inside:
                checked += 1
                assert lr.optimistic_gain >= rho_star - 1 / math.sqrt(lr.t)
    assert checked > 5


def test_fixed_policy_regret_bounded():
    # expected regret of the optimal policy from s0 is V(s0) - (P^T V)(s0) -> V(s0)
    m = build_chain_env(-2.5)
    pi = optimal_policy(m)
    v = bias_and_q(m, pi).bias_v
    for horizon in (500, 5000):
        regs = [empirical_regret(run_online(m, None, pi, FixedPolicyLearner(pi), horizon,
                                            seed=k), m) for k in range(100)]
        se = np.std(regs, ddof=1) / 10
        assert abs(np.mean(regs) - v[0]) < 3.5 * se
    assert abs(v[0]) <= np.ptp(v)


class TestUniform:
    def test_action_frequencies_uniform(self):
        m = build_chain_env(0.0)
        tr = run_online(m, None, chain_target(), UniformRandomLearner(4, 2, seed=4), 100_000)
        counts = np.bincount(tr.actions, minlength=2)
        assert stats.chisquare(counts).pvalue > 0.0027

    def test_avg_miss_half(self):
        tr = run_online(build_chain_env(0.0), None, chain_target(),
                        UniformRandomLearner(4, 2, seed=5), 100_000)
        assert abs(avg_miss(tr) - 0.5) < 3 * math.sqrt(0.25 / 100_000)

    def test_no_counts(self):
        lr = UniformRandomLearner(3, 2)
        lr.observe(0, 1, 0.5, 2)
        assert not hasattr(lr, "counts_sas") and lr.t == 1


def test_evi_zero_radius_finds_optimal_gain():
    from envpoison import kernels
    for m, _, _ in [(oracles.random_ergodic_mdp(np.random.default_rng(k), 3, 2), 0, 0)
                    for k in range(5)]:
        pol, u, g, it, ok = kernels.evi(np.array(m.transitions), np.zeros((3, 2)),
                                        np.array(m.rewards), 0.01, 1e-10, 100_000)
        assert ok
        rho = bias_and_q(m, optimal_policy(m)).gain
        assert g == pytest.approx(rho, abs=1e-8)
