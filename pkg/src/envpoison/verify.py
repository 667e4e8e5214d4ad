"""Property and oracle checks on a user MDP, as run by ``envpoison verify``.

Each check returns ``(name, passed, detail)``.  Exhaustive checks are
skipped when there are more than ``max_policies`` deterministic policies.
"""
import numpy as np

from .attacks.dynamics import (attack_dynamics_nontarget, feasibility_table,
                               sufficient_condition)
from .attacks.reward import attack_reward_general, attack_reward_nontarget
from .chain import (bias_and_q, brute_force_gains, hitting_times, is_eps_robust_optimal,
                    neighbor_gains, stationary_distribution)
from .config import DEFAULT
from .errors import PoisonError
from .lp import lp_norm
from .mdp import check_ergodic, neighbor, neighbors, policy_kernel
from .scores import chi_table


def power_stationary(kernel, tol=1e-13, max_iter=1_000_000):
    """Stationary law by power iteration on the lazy chain ``(I + P) / 2``."""
    n = kernel.shape[0]
    lazy = 0.5 * (np.eye(n) + kernel)
    mu = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = mu @ lazy
        if np.max(np.abs(nxt - mu)) < tol:
            return nxt / nxt.sum()
        mu = nxt
    return mu / mu.sum()


def brute_force_robust(mdp, policy, eps, tol=1e-8):
    """``rho(policy) >= rho(other) + eps`` for every other deterministic policy."""
    gains = brute_force_gains(mdp)
    rho = next(g for pi, g in gains if pi == policy)
    return all(rho >= g + eps - tol for pi, g in gains if pi != policy)


def _check(name, fn):
    try:
        ok, detail = fn()
    except PoisonError as exc:
        return name, False, f"{type(exc).__name__}: {exc}"
    return name, bool(ok), detail


def run_checks(mdp, target, eps=0.1, delta=1e-4, max_policies=4096, tol=DEFAULT):
    out = []
    n_s, n_a = mdp.n_states, mdp.n_actions
    enumerable = n_a ** n_s <= max_policies

    out.append(_check("ergodic under target",
                      lambda: (check_ergodic(mdp, target), "")))

    def stationary():
        mu = stationary_distribution(mdp, target, tol)
        k = policy_kernel(mdp, target)
        res = float(np.max(np.abs(mu @ k - mu)))
        gap = float(np.max(np.abs(mu - power_stationary(k))))
        return res <= 1e-9 and gap <= 1e-9, f"residual {res:.2e}, power-iteration gap {gap:.2e}"
    out.append(_check("stationary distribution", stationary))

    def bias():
        st = bias_and_q(mdp, target, tol)
        k = policy_kernel(mdp, target)
        r = mdp.rewards[np.arange(n_s), target.actions]
        res = float(np.max(np.abs(st.bias_v - (r - st.gain + k @ st.bias_v))))
        norm = abs(float(st.stationary @ st.bias_v))
        return res <= 1e-8 and norm <= 1e-8, f"Bellman residual {res:.2e}, mu.V {norm:.2e}"
    out.append(_check("bias equations", bias))

    def hitting():
        t = hitting_times(mdp, target, tol)
        k = policy_kernel(mdp, target)
        worst = 0.0
        for j in range(n_s):
            col = t[:, j].copy()
            col[j] = 0.0
            resid = 1.0 + k @ col - t[:, j]
            resid[j] = 0.0
            worst = max(worst, float(np.max(np.abs(resid))))
        return worst <= 1e-8, f"residual {worst:.2e}"
    out.append(_check("hitting times", hitting))

    def corollary():
        st = bias_and_q(mdp, target, tol)
        worst = 0.0
        for s, a, nb in neighbors(target, n_a):
            stn = bias_and_q(mdp, nb, tol)
            lhs = st.gain - stn.gain
            rhs = stn.stationary[s] * (st.q[s, target[s]] - st.q[s, a])
            worst = max(worst, abs(lhs - rhs))
        return worst <= 1e-8, f"max deviation {worst:.2e}"
    out.append(_check("neighbor gain identity", corollary))

    def stationary_formula():
        t = hitting_times(mdp, target, tol)
        worst = 0.0
        for s, a, nb in neighbors(target, n_a):
            mu = stationary_distribution(mdp, nb, tol)[s]
            row = mdp.transitions[s, a].copy()
            row[s] = 0.0
            worst = max(worst, abs(mu - 1.0 / (1.0 + row @ t[:, s])))
        return worst <= 1e-8, f"max deviation {worst:.2e}"
    out.append(_check("neighbor stationary mass from hitting times", stationary_formula))

    if enumerable:
        for e in sorted({0.0, float(eps)}):
            out.append(_check(
                f"neighbor test matches exhaustive search (eps={e:g})",
                lambda e=e: (is_eps_robust_optimal(mdp, target, e, tol)
                             == brute_force_robust(mdp, target, e), "")))

    def nt_reward():
        res = attack_reward_nontarget(mdp, target, eps, np.inf, tol)
        idx = np.arange(n_s)
        same = np.array_equal(res.r_hat[idx, target.actions], mdp.rewards[idx, target.actions])
        ok = same and (not enumerable or brute_force_robust(res.mdp_hat, target, eps, 1e-7))
        return ok, f"cost {res.cost:.6g}"
    out.append(_check("non-target reward attack", nt_reward))

    def general_reward():
        msgs = []
        ok = True
        nt = attack_reward_nontarget(mdp, target, eps, np.inf, tol)
        for p in (1, 2, np.inf):
            res = attack_reward_general(mdp, target, eps, p, tol)
            cost_nt = lp_norm(nt.chi, p)
            ok &= res.lower_bound - 1e-6 <= res.cost <= res.upper_bound + 1e-6
            ok &= res.cost <= cost_nt + 1e-6
            msgs.append(f"p={p}: {res.cost:.6g} in [{res.lower_bound:.6g}, {res.upper_bound:.6g}]")
        return ok, "; ".join(msgs)
    out.append(_check("general reward attack bounds", general_reward))

    def dynamics():
        _, feas = feasibility_table(mdp, target, eps, delta, tol)
        suff = sufficient_condition(mdp, target, eps, delta, tol)
        if suff and not feas:
            return False, "sufficient condition holds but the attack is infeasible"
        res = attack_dynamics_nontarget(mdp, target, eps, delta, np.inf, tol)
        if res.feasible != feas:
            return False, "feasibility flag disagrees with C table"
        if not feas:
            return True, f"infeasible at {res.violations}"
        p_hat = res.p_hat
        rows_ok = np.max(np.abs(p_hat.sum(axis=2) - 1)) <= 1e-9
        floor_ok = np.all(p_hat >= delta * mdp.transitions - 1e-9)
        idx = np.arange(n_s)
        untouched = np.array_equal(p_hat[idx, target.actions], mdp.transitions[idx, target.actions])
        ok = rows_ok and floor_ok and untouched
        if enumerable:
            ok &= brute_force_robust(res.mdp_hat, target, eps, 1e-7)
        return ok, f"cost {res.cost:.6g}"
    out.append(_check("non-target dynamics attack", dynamics))

    def chi_zero_on_target():
        chi = chi_table(mdp, target, eps, tol)
        return bool(np.all(chi[np.arange(n_s), target.actions] == 0) and np.all(chi >= 0)), ""
    out.append(_check("chi table sign pattern", chi_zero_on_target))
    return out


__all__ = ["run_checks", "power_stationary", "brute_force_robust", "neighbor", "neighbor_gains"]
