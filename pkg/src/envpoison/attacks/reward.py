"""Offline reward poisoning.

``attack_reward_general`` solves the full problem: the cheapest reward
matrix (in l_p distance) under which the target beats every neighbor
policy by ``eps`` with the original stationary distributions.
``attack_reward_nontarget`` is the closed form ``R_hat = R - chi`` that
touches only non-target actions.
"""
from dataclasses import dataclass, field

import numpy as np

from ..chain import gain, hajnal_alpha, is_eps_robust_optimal, stationary_distribution
from ..config import DEFAULT
from ..errors import DomainError, SolverFailure
from ..lp import LinearProgram, lp_norm, min_lp_norm_to_point, parse_p
from ..mdp import dumps_document, neighbors
from ..scores import chi_table

GENERAL = "General"
NONTARGET = "NonTargetOnly"


@dataclass(frozen=True, eq=False)
class RewardAttackResult:
    r_hat: np.ndarray
    cost: float
    p: float
    lower_bound: float
    upper_bound: float
    mode: str
    chi: np.ndarray = field(repr=False)
    base: object = field(repr=False)
    feasible: bool = True
    info: dict = field(default_factory=dict, repr=False)

    @property
    def mdp_hat(self):
        return self.base.with_rewards(self.r_hat)

    def to_document(self):
        head = {"attack": "reward", "mode": self.mode, "p": _p_text(self.p),
                "cost": self.cost, "lower_bound": self.lower_bound,
                "upper_bound": self.upper_bound, "feasible": self.feasible}
        return {**head, **self.mdp_hat.to_dict()}

    def dumps(self):
        return dumps_document(self.to_document())


def _p_text(p):
    return "inf" if p == np.inf else str(int(p))


def reward_bounds(mdp, target, eps, p, tol=DEFAULT, _chi=None):
    """``(alpha / 2) * ||chi||_inf`` and ``||chi||_p`` for the reward attack."""
    p = parse_p(p)
    chi = chi_table(mdp, target, eps, tol) if _chi is None else _chi
    lower = 0.5 * hajnal_alpha(mdp) * lp_norm(chi, np.inf)
    return lower, lp_norm(chi, p)


def success_constraints(mdp, target, eps, tol=DEFAULT):
    """Rows ``G`` and right-hand side ``h`` with ``G vec(R) <= h`` iff the attack succeeds.

    One row per neighbor: ``rho_nb(R) - rho_target(R) <= -eps`` with both
    stationary laws taken on the unmodified kernel.
    """
    n_s, n_a = mdp.n_states, mdp.n_actions
    mu_t = stationary_distribution(mdp, target, tol)
    rows = []
    pairs = []
    for s, a, nb in neighbors(target, n_a):
        mu_nb = stationary_distribution(mdp, nb, tol)
        g = np.zeros((n_s, n_a))
        g[np.arange(n_s), nb.actions] += mu_nb
        g[np.arange(n_s), target.actions] -= mu_t
        rows.append(g.ravel())
        pairs.append((s, a))
    g = np.array(rows).reshape(len(rows), n_s * n_a)
    return g, np.full(len(rows), -float(eps)), pairs


def _verify(mdp_hat, target, eps, tol, what):
    slack = tol.tie
    if not is_eps_robust_optimal(mdp_hat, target, eps, tol):
        rho = gain(mdp_hat, target, tol)
        raise SolverFailure(f"{what}: target is not {eps}-robust optimal after the attack "
                            f"(gain {rho:.12g}, slack {slack:g})")


def attack_reward_general(mdp, target, eps, p=np.inf, tol=DEFAULT):
    """Cheapest reward poisoning (any entry may change) in l_p distance, p in {1, 2, inf}."""
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    p = parse_p(p)
    if p == 0:
        raise DomainError("the general reward attack needs p in {1, 2, inf}")
    target.validate(mdp)
    chi = chi_table(mdp, target, eps, tol)
    lower, upper = reward_bounds(mdp, target, eps, p, tol, chi)
    base = mdp.rewards.ravel()
    info = {}
    if mdp.n_actions == 1:
        r_hat = mdp.rewards.copy()
    else:
        g, h, _ = success_constraints(mdp, target, eps, tol)
        cons = LinearProgram.feasibility(base.size, ineq_lhs=g, ineq_rhs=h,
                                         lower=-np.inf, upper=np.inf)
        rep = min_lp_norm_to_point(base, p, cons, tol)
        if not rep.ok:
            raise SolverFailure(f"reward attack solver returned {rep.status}")
        info = {"iterations": rep.iterations, "kkt_residual": rep.kkt_residual,
                "max_violation": rep.max_violation, **rep.info}
        r_hat = rep.solution.reshape(mdp.rewards.shape)
    _verify(mdp.with_rewards(r_hat), target, eps, tol, "general reward attack")
    return RewardAttackResult(r_hat=r_hat, cost=lp_norm(r_hat - mdp.rewards, p), p=p,
                              lower_bound=lower, upper_bound=upper, mode=GENERAL,
                              chi=chi, base=mdp, info=info)


def attack_reward_nontarget(mdp, target, eps, p=np.inf, tol=DEFAULT):
    """Closed-form attack lowering each non-target reward by ``chi``."""
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    p = parse_p(p)
    target.validate(mdp)
    chi = chi_table(mdp, target, eps, tol)
    r_hat = mdp.rewards - chi
    # chi is exactly zero on target actions, keep those entries bit-identical
    r_hat[np.arange(mdp.n_states), target.actions] = \
        mdp.rewards[np.arange(mdp.n_states), target.actions]
    _verify(mdp.with_rewards(r_hat), target, eps, tol, "non-target reward attack")
    lower, upper = reward_bounds(mdp, target, eps, p, tol, chi)
    return RewardAttackResult(r_hat=r_hat, cost=lp_norm(chi, p), p=p, lower_bound=lower,
                              upper_bound=upper, mode=NONTARGET, chi=chi, base=mdp)
