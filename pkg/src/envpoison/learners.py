"""Online learners for the average-reward setting.

:class:`Ucrl2` is the optimistic regret minimiser (episodes end when some
pair's in-episode count reaches its count at episode start; each episode
plays the policy returned by extended value iteration).
:class:`UniformRandomLearner` is a baseline with linear regret.
"""
import math

import numpy as np

from . import kernels


class Learner:
    """Interface: ``act(s) -> a`` then ``observe(s, a, r, s_next)``."""

    n_states: int
    n_actions: int

    def act(self, s):
        raise NotImplementedError

    def observe(self, s, a, r, s_next):
        raise NotImplementedError


class Ucrl2(Learner):
    """UCRL2 with l1 transition confidence balls and Hoeffding reward radii.

    Parameters
    ----------
    n_states, n_actions : int
    confidence : float
        Failure probability ``delta`` in the confidence radii.
    reward_range : float
        Scale of the reward radius and cap on optimistic rewards.
    tau : float
        Self-loop weight of the aperiodicity transform inside EVI.
    evi_tol_scale : float
        EVI stops when ``span(u_new - u) < evi_tol_scale / sqrt(t)``.
    evi_max_iter : int
    backend : module, optional
        Kernel backend (see :mod:`envpoison.kernels`); the active one by default.
    """

    def __init__(self, n_states, n_actions, confidence=0.05, reward_range=1.0, tau=0.01,
                 evi_tol_scale=1.0, evi_max_iter=100_000, backend=None):
        if not 0 < confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if reward_range <= 0:
            raise ValueError("reward_range must be positive")
        self.n_states = n_states
        self.n_actions = n_actions
        self.confidence = float(confidence)
        self.reward_range = float(reward_range)
        self.tau = float(tau)
        self.evi_tol_scale = float(evi_tol_scale)
        self.evi_max_iter = int(evi_max_iter)
        self.kern = backend if backend is not None else kernels.backend
        self.counts_sas = np.zeros((n_states, n_actions, n_states), dtype=np.int64)
        self.reward_sums = np.zeros((n_states, n_actions))
        self.nu = np.zeros((n_states, n_actions), dtype=np.int64)
        self.n_k = np.zeros((n_states, n_actions), dtype=np.int64)
        self.t = 0
        self.episodes = 0
        self.evi_failures = 0
        self.optimistic_gain = np.nan
        self.policy = np.zeros(n_states, dtype=np.int64)
        self._plan()

    @property
    def counts_sa(self):
        return self.n_k + self.nu

    def radii(self, t=None):
        """Transition and reward confidence radii at time ``t`` (default: now)."""
        t = max(1, self.t if t is None else t)
        n = np.maximum(1, self.counts_sa)
        s, a = self.n_states, self.n_actions
        d_p = np.sqrt(14.0 * s * math.log(2.0 * a * t / self.confidence) / n)
        d_r = self.reward_range * np.sqrt(
            7.0 * math.log(2.0 * s * a * t / self.confidence) / (2.0 * n))
        return d_p, d_r

    def empirical(self):
        n = self.counts_sa
        safe = np.maximum(1, n)
        p_hat = self.counts_sas / safe[:, :, None]
        p_hat[n == 0] = 1.0 / self.n_states
        r_hat = self.reward_sums / safe
        return p_hat, r_hat

    def _plan(self):
        p_hat, r_hat = self.empirical()
        d_p, d_r = self.radii()
        r_opt = np.minimum(r_hat + d_r, self.reward_range)
        tol = self.evi_tol_scale / math.sqrt(max(1, self.t))
        policy, _, g, _, ok = self.kern.evi(p_hat, d_p, r_opt, self.tau, tol, self.evi_max_iter)
        if not ok:
            self.evi_failures += 1
        self.policy = np.asarray(policy, dtype=np.int64)
        # the self-loop transform leaves the gain unchanged
        self.optimistic_gain = float(g)
        self.episodes += 1

    def _new_episode(self):
        self.n_k += self.nu
        self.nu[:] = 0
        self._plan()

    def act(self, s):
        return int(self.policy[s])

    def observe(self, s, a, r, s_next):
        self.counts_sas[s, a, s_next] += 1
        self.reward_sums[s, a] += r
        self.nu[s, a] += 1
        self.t += 1
        if self.nu[s, a] >= max(1, self.n_k[s, a]):
            self._new_episode()

    def rollout(self, cdf, rewards, state, uniforms, out_s, out_a, out_r, out_next):
        """Fast path: play ``len(uniforms)`` steps against a fixed sampling kernel.

        ``cdf`` holds row-wise cumulative sums of the sampling kernel and
        ``rewards`` the reported reward table.  Produces exactly the trace
        of the ``act``/``observe`` loop with the same uniforms.
        """
        horizon = len(uniforms)
        t = 0
        while t < horizon:
            nxt, state, over = self.kern.run_segment(
                self.policy, cdf, rewards, state, uniforms, t, horizon, self.nu, self.n_k,
                self.counts_sas, self.reward_sums, out_s, out_a, out_r, out_next)
            self.t += nxt - t
            t = nxt
            if over:
                self._new_episode()
        return state


class UniformRandomLearner(Learner):
    """Plays every action with equal probability and learns nothing."""

    def __init__(self, n_states, n_actions, seed=0):
        self.n_states = n_states
        self.n_actions = n_actions
        # stream 1 of the seed; stream 0 drives the environment
        self.rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1])))
        self.t = 0

    def act(self, s):
        return int(self.rng.integers(self.n_actions))

    def observe(self, s, a, r, s_next):
        self.t += 1


class FixedPolicyLearner(Learner):
    """Always plays a given deterministic policy (used as a regret reference)."""

    def __init__(self, policy):
        self.actions = np.asarray(getattr(policy, "actions", policy), dtype=np.int64)
        self.n_states = self.actions.shape[0]
        self.t = 0

    def act(self, s):
        return int(self.actions[s])

    def observe(self, s, a, r, s_next):
        self.t += 1
