"""Online poisoning loop and its metrics.

The attacker fixes a sampling MDP up front.  In reward mode the next state
comes from the true kernel and the learner sees ``R_hat``; in dynamics
mode the next state comes from ``P_hat`` and the learner sees the true
reward.  Randomness is a Philox counter-based generator keyed by the seed;
all uniforms are drawn before the run and next states are sampled by
inverse CDF, so the compiled and pure-Python paths give the same trace.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .chain import bias_and_q, optimal_policy
from .config import DEFAULT
from .errors import DimensionMismatch, DomainError
from .lp import parse_p
from .scores import k_bound, mu_max

NONE = "None"
REWARD = "RewardPoison"
DYNAMICS = "DynamicsPoison"
SUMMARY_COLUMNS = ("t", "state", "action", "reward", "mismatch", "manipulation",
                   "cumulative_miss", "cumulative_cost_l1")


@dataclass(frozen=True, eq=False)
class Attack:
    """A fixed sampling MDP and how it is used."""

    mode: str
    mdp_hat: object = None

    @classmethod
    def none(cls):
        return cls(NONE)

    @classmethod
    def reward(cls, mdp_hat):
        return cls(REWARD, mdp_hat)

    @classmethod
    def dynamics(cls, mdp_hat):
        return cls(DYNAMICS, mdp_hat)


def as_attack(attack):
    """Accept an :class:`Attack`, None, or an offline attack result."""
    if attack is None:
        return Attack.none()
    if isinstance(attack, Attack):
        return attack
    if hasattr(attack, "r_hat"):
        return Attack.reward(attack.mdp_hat)
    if hasattr(attack, "p_hat"):
        return Attack.dynamics(attack.mdp_hat)
    raise DomainError(f"cannot interpret {type(attack).__name__} as an attack")


@dataclass(eq=False)
class OnlineTrace:
    """Column-wise record of one run; step ``t`` went ``states[t] -> next_states[t]``."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    mismatch: np.ndarray
    manipulation: np.ndarray
    mode: str
    seed: int
    env: object = field(repr=False, default=None)
    target: object = field(repr=False, default=None)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def horizon(self):
        return int(self.states.shape[0])

    def steps(self):
        """Yield ``(s, a, r, s_next, mismatch, manipulation)`` tuples."""
        for row in zip(self.states.tolist(), self.actions.tolist(), self.rewards.tolist(),
                       self.next_states.tolist(), self.mismatch.tolist(),
                       self.manipulation.tolist()):
            yield row


def manipulation_table(env, attack):
    """Per-pair manipulation magnitude of ``attack`` relative to ``env``."""
    if attack.mode == REWARD:
        return np.abs(attack.mdp_hat.rewards - env.rewards)
    if attack.mode == DYNAMICS:
        return np.abs(attack.mdp_hat.transitions - env.transitions).sum(axis=2)
    return np.zeros((env.n_states, env.n_actions))


def sampling_tables(env, attack):
    """``(kernel, reported rewards)`` the learner is exposed to."""
    if attack.mode == REWARD:
        return env.transitions, attack.mdp_hat.rewards
    if attack.mode == DYNAMICS:
        return attack.mdp_hat.transitions, env.rewards
    return env.transitions, env.rewards


def cumulative_kernel(p):
    cdf = np.cumsum(p, axis=2)
    cdf[..., -1] = 1.0
    return np.ascontiguousarray(cdf)


def step_uniforms(seed, horizon):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0]))).random(horizon)


def run_online(env, attack, target, learner, horizon, seed=0, initial_state=0, fast=True):
    """Simulate ``horizon`` steps of ``learner`` against the poisoned feedback.

    Parameters
    ----------
    env : Mdp
        The original environment.
    attack : Attack, attack result or None
    target : DetPolicy
    learner : Learner
        Mutated in place.
    fast : bool
        Use the learner's ``rollout`` method when it has one.
    """
    attack = as_attack(attack)
    if attack.mdp_hat is not None and not env.same_shape(attack.mdp_hat):
        raise DimensionMismatch("attack MDP and environment differ in (S, A)")
    target.validate(env)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    kernel, rewards = sampling_tables(env, attack)
    cdf = cumulative_kernel(kernel)
    rewards = np.ascontiguousarray(rewards, dtype=float)
    uniforms = step_uniforms(seed, horizon)
    out_s = np.zeros(horizon, dtype=np.int64)
    out_a = np.zeros(horizon, dtype=np.int64)
    out_r = np.zeros(horizon)
    out_n = np.zeros(horizon, dtype=np.int64)
    n_s = env.n_states
    if fast and hasattr(learner, "rollout"):
        learner.rollout(cdf, rewards, int(initial_state), uniforms, out_s, out_a, out_r, out_n)
    else:
        s = int(initial_state)
        for t in range(horizon):
            a = learner.act(s)
            nxt = min(int(np.searchsorted(cdf[s, a], uniforms[t], side="right")), n_s - 1)
            r = rewards[s, a]
            out_s[t], out_a[t], out_r[t], out_n[t] = s, a, r, nxt
            learner.observe(s, a, r, nxt)
            s = nxt
    manip = manipulation_table(env, attack)[out_s, out_a]
    miss = (out_a != target.actions[out_s]).astype(np.int8)
    return OnlineTrace(out_s, out_a, out_r, out_n, miss, manip, attack.mode, seed,
                       env=env, target=target,
                       info={"episodes": getattr(learner, "episodes", None)})


def avg_miss(trace, t=None):
    """Fraction of the first ``t`` steps (default all) with ``a != target(s)``."""
    t = trace.horizon if t is None else int(t)
    if t == 0:
        return 0.0
    return float(trace.mismatch[:t].sum()) / t


def avg_cost(trace, p=1, t=None):
    """``(1/t) * (sum of manipulation^p)^(1/p)``; p = inf uses the max, p = 0 the count."""
    p = parse_p(p)
    t = trace.horizon if t is None else int(t)
    if t == 0:
        return 0.0
    m = trace.manipulation[:t]
    if p == 0:
        return float(np.count_nonzero(m > 1e-12)) / t
    if p == np.inf:
        return float(m.max()) / t
    if p == 1:
        return float(m.sum()) / t
    return float(np.sum(m ** p) ** (1.0 / p)) / t


def miss_curve(trace, times):
    c = np.concatenate([[0], np.cumsum(trace.mismatch, dtype=np.int64)])
    times = np.asarray(times, dtype=np.int64)
    return c[times] / np.maximum(times, 1)


def cost_curve(trace, times, p=1):
    p = parse_p(p)
    times = np.asarray(times, dtype=np.int64)
    m = trace.manipulation
    if p == 0:
        c = np.concatenate([[0.0], np.cumsum(m > 1e-12)])
        return c[times] / np.maximum(times, 1)
    if p == np.inf:
        c = np.concatenate([[0.0], np.maximum.accumulate(m)]) if m.size else np.zeros(1)
        return c[times] / np.maximum(times, 1)
    c = np.concatenate([[0.0], np.cumsum(m ** p)])
    return c[times] ** (1.0 / p) / np.maximum(times, 1)


def optimal_gain(mdp, tol=DEFAULT):
    pi = optimal_policy(mdp, tol)
    return bias_and_q(mdp, pi, tol).gain


def empirical_regret(trace, reference, t=None, tol=DEFAULT, rho_star=None):
    """``rho* T - sum r_t`` with ``rho*`` the optimal gain of ``reference``."""
    t = trace.horizon if t is None else int(t)
    if t == 0:
        return 0.0
    rho = optimal_gain(reference, tol) if rho_star is None else rho_star
    return rho * t - float(trace.rewards[:t].sum())


def attack_scale(env, target, eps, mode, delta=1e-4, tol=DEFAULT):
    """``||chi||_inf`` for reward mode, ``2 ||Lambda||_inf`` for dynamics mode (on ``env``)."""
    from .scores import chi_table, dyn_score_tables
    if mode == REWARD:
        return float(np.max(chi_table(env, target, eps, tol), initial=0.0))
    if mode == DYNAMICS:
        return 2.0 * float(np.max(dyn_score_tables(env, target, eps, delta, tol).lam,
                                  initial=0.0))
    return 0.0


def bound_values(regret, horizon, m_hat, target, eps, p, scale, tol=DEFAULT):
    """``(K / T, scale * K^(1/p) / T)`` with ``K`` from the regret plug-in on ``m_hat``."""
    p = parse_p(p)
    if horizon <= 0:
        return 0.0, 0.0
    stats = bias_and_q(m_hat, target, tol)
    k = k_bound(max(0.0, regret), eps, mu_max(m_hat, target, tol),
                float(np.max(np.abs(stats.bias_v))))
    if p == 0:
        return k / horizon, min(1.0, k / horizon)
    root = 1.0 if p == np.inf else k ** (1.0 / p)
    return k / horizon, scale * root / horizon


def theoretical_bounds(trace, m_hat, target, eps, p=1, delta=1e-4, tol=DEFAULT, scale=None):
    """Mismatch and cost bounds for a trace whose feedback came from ``m_hat``."""
    if scale is None:
        scale = attack_scale(trace.env, target, eps, trace.mode, delta, tol)
    regret = empirical_regret(trace, m_hat, tol=tol)
    return bound_values(regret, trace.horizon, m_hat, target, eps, p, scale, tol)


def summary_rows(trace, cadence=1000):
    """Rows of the trace summary at steps ``cadence, 2*cadence, ...`` (and the last step)."""
    n = trace.horizon
    if n == 0:
        return []
    idx = list(range(cadence - 1, n, cadence))
    if not idx or idx[-1] != n - 1:
        idx.append(n - 1)
    cm = np.cumsum(trace.mismatch, dtype=np.int64)
    cc = np.cumsum(trace.manipulation)
    rows = []
    for i in idx:
        rows.append((i + 1, int(trace.states[i]), int(trace.actions[i]),
                     float(trace.rewards[i]), int(trace.mismatch[i]),
                     float(trace.manipulation[i]), int(cm[i]), float(cc[i])))
    return rows


def write_summary_csv(trace, fh, cadence=1000, fmt=".12g", header=True):
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(SUMMARY_COLUMNS)
    for row in summary_rows(trace, cadence):
        w.writerow([format(v, fmt) if isinstance(v, float) else v for v in row])
