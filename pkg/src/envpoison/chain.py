"""Average-reward quantities of a fixed policy: stationary law, gain, bias, hitting times.

All linear systems go through :func:`lu_solve`, a dense LU with partial
pivoting that raises :class:`SingularChain` when a pivot falls below the
configured threshold.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .config import DEFAULT
from .errors import NoConvergence, SingularChain
from .mdp import DetPolicy, all_policies, neighbors, policy_kernel, policy_rewards


def lu_solve(a, b, tol=DEFAULT, what="linear system"):
    """Solve ``a x = b`` by LU with partial pivoting, rejecting tiny pivots."""
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < tol.pivot:
        raise SingularChain(f"{what} is singular (pivot below {tol.pivot:g})")
    return sla.lu_solve((lu, piv), b, check_finite=False)


@dataclass(frozen=True, eq=False)
class PolicyStats:
    gain: float
    stationary: np.ndarray
    bias_v: np.ndarray
    q: np.ndarray


def stationary_of_kernel(kernel, tol=DEFAULT):
    n = kernel.shape[0]
    a = kernel.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = lu_solve(a, b, tol, "stationary-distribution system")
    # round-off can leave -1e-17 entries on near-transient states
    mu = np.where(np.abs(mu) < 1e-15, 0.0, mu)
    return mu / mu.sum()


def stationary_distribution(mdp, policy, tol=DEFAULT):
    """Stationary distribution of the chain ``P(., policy(.), .)``."""
    policy.validate(mdp)
    return stationary_of_kernel(policy_kernel(mdp, policy), tol)


def gain(mdp, policy, tol=DEFAULT):
    """Average reward ``sum_s mu(s) R(s, policy(s))``."""
    mu = stationary_distribution(mdp, policy, tol)
    return float(mu @ policy_rewards(mdp, policy))


def bias_and_q(mdp, policy, tol=DEFAULT):
    """Gain, stationary law, bias ``V`` (with ``mu . V = 0``) and ``Q`` of a policy.

    ``V`` solves ``(I - P_pi + 1 mu^T) V = r_pi - rho``; the rank-one term
    pins the normalisation without a separate constraint row.
    """
    policy.validate(mdp)
    kernel = policy_kernel(mdp, policy)
    r_pi = policy_rewards(mdp, policy)
    mu = stationary_of_kernel(kernel, tol)
    rho = float(mu @ r_pi)
    n = mdp.n_states
    a = np.eye(n) - kernel + np.outer(np.ones(n), mu)
    v = lu_solve(a, r_pi - rho, tol, "bias system")
    q = mdp.rewards - rho + mdp.transitions @ v
    # Q(s, pi(s)) equals V(s) analytically; overwrite the round-off
    q[np.arange(n), policy.actions] = v
    return PolicyStats(gain=rho, stationary=mu, bias_v=v, q=q)


def hitting_times(mdp, policy, tol=DEFAULT):
    """Expected first-passage times ``T[s, target]`` (diagonal zero)."""
    policy.validate(mdp)
    return hitting_times_of_kernel(policy_kernel(mdp, policy), tol)


def hitting_times_of_kernel(kernel, tol=DEFAULT):
    n = kernel.shape[0]
    out = np.zeros((n, n))
    for j in range(n):
        keep = np.arange(n) != j
        sub = kernel[np.ix_(keep, keep)]
        t = lu_solve(np.eye(n - 1) - sub, np.ones(n - 1), tol,
                     f"hitting-time system for target {j}")
        out[keep, j] = t
    return out


def diameter(mdp, policy, tol=DEFAULT):
    """Largest expected hitting time between two states under ``policy``."""
    t = hitting_times(mdp, policy, tol)
    return float(t.max()) if t.size > 1 else 0.0


def hajnal_alpha(mdp):
    """``min over row pairs of sum_x min(P(s,a,x), P(s',a',x))``."""
    rows = mdp.transitions.reshape(-1, mdp.n_states)
    best = 1.0
    # chunked to keep the pairwise tensor small on |S||A| ~ 200
    step = max(1, 4_000_000 // max(1, rows.shape[0] * rows.shape[1]))
    for i in range(0, rows.shape[0], step):
        block = np.minimum(rows[i:i + step, None, :], rows[None, :, :]).sum(axis=2)
        best = min(best, float(block.min()))
    return max(0.0, min(1.0, best))


def neighbor_gains(mdp, policy, tol=DEFAULT):
    """Map ``(s, a) -> (gain, mu(s))`` for each neighbor of ``policy``."""
    out = {}
    for s, a, nb in neighbors(policy, mdp.n_actions):
        try:
            mu = stationary_distribution(mdp, nb, tol)
        except SingularChain as exc:
            raise SingularChain(f"neighbor policy at (s={s}, a={a}): {exc}") from exc
        out[s, a] = (float(mu @ policy_rewards(mdp, nb)), float(mu[s]))
    return out


def is_eps_robust_optimal(mdp, policy, eps, tol=DEFAULT):
    """Neighbor test: ``rho(pi) >= rho(pi{s;a}) + eps`` for every neighbor."""
    if mdp.n_actions == 1:
        return True
    rho = gain(mdp, policy, tol)
    for g, _ in neighbor_gains(mdp, policy, tol).values():
        if rho - g - eps < -tol.tie:
            return False
    return True


def optimal_policy(mdp, tol=DEFAULT, start=None):
    """Gain-optimal deterministic policy by average-reward policy iteration.

    Improvement switches an action only when its Q-value beats the current
    one by more than ``tol.tie``; ties keep the incumbent, and among strictly
    better actions the lowest index wins.
    """
    n_s, n_a = mdp.n_states, mdp.n_actions
    pi = DetPolicy(np.zeros(n_s, dtype=np.int64) if start is None else start.actions)
    cap = n_a ** n_s
    for _ in range(cap + 1):
        stats = bias_and_q(mdp, pi, tol)
        q = stats.q
        cur = q[np.arange(n_s), pi.actions]
        best = np.argmax(q, axis=1)
        improve = q[np.arange(n_s), best] > cur + tol.tie
        if not np.any(improve):
            return pi
        acts = pi.actions.copy()
        acts[improve] = best[improve]
        pi = DetPolicy(acts)
    raise NoConvergence(f"policy iteration exceeded {cap} improvements")


def brute_force_gains(mdp, tol=DEFAULT):
    """Gain of every deterministic policy, in :func:`all_policies` order."""
    return [(pi, gain(mdp, pi, tol)) for pi in all_policies(mdp.n_states, mdp.n_actions)]
