"""Offline transition-dynamics poisoning.

The non-target-only attack decouples into one small l1 LP per
non-target ``(s, a)`` row.  Writing the neighbor's stationary mass at
``s`` through hitting times of the target chain turns the success
condition into the linear constraint ``x . U(s, .) <= R(s, target) + B(s) - R(s, a) - eps``.
The constructive attack mixes each row toward the lowest-bias state, and
the general attack runs the non-target LPs on a pool of kernels whose
target rows were perturbed to raise the target's gain.
"""
from dataclasses import dataclass, field

import numpy as np

from ..chain import bias_and_q, gain, is_eps_robust_optimal
from ..config import DEFAULT
from ..errors import DomainError, Infeasible, PreconditionFailed, SolverFailure
from ..lp import LinearProgram, lp_norm, min_lp_norm_to_point, parse_p
from ..mdp import chain_is_ergodic, dumps_document
from ..scores import dyn_score_tables, target_mask

NONTARGET = "NonTargetOnly"
CONSTRUCTIVE = "Constructive"
GENERAL_POOL = "GeneralPool"
DEFAULT_DELTA = 1e-4


@dataclass(frozen=True, eq=False)
class DynAttackResult:
    p_hat: np.ndarray
    cost: float
    p: float
    feasible: bool
    per_row_cost: np.ndarray
    lower_bound: float
    upper_bound: float
    mode: str
    base: object = field(repr=False)
    violations: list = field(default_factory=list)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def mdp_hat(self):
        if not self.feasible:
            raise Infeasible("no poisoned kernel for an infeasible attack", self.violations)
        return self.base.with_transitions(self.p_hat)

    def to_document(self):
        head = {"attack": "dynamics", "mode": self.mode,
                "p": "inf" if self.p == np.inf else str(int(self.p)),
                "cost": self.cost, "lower_bound": self.lower_bound,
                "upper_bound": self.upper_bound, "feasible": self.feasible,
                "violations": [list(v) for v in self.violations],
                "per_row_cost": self.per_row_cost.ravel().tolist()}
        if not self.feasible:
            return head
        return {**head, **self.mdp_hat.to_dict()}

    def dumps(self):
        return dumps_document(self.to_document())


def _check_args(eps, delta):
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")


def feasibility_table(mdp, target, eps, delta=DEFAULT_DELTA, tol=DEFAULT, _tables=None):
    """``C(s, a)`` and whether ``C >= eps`` on every non-target pair.

    The non-target attack has a solution exactly when the flag is true.
    Target entries of ``C`` are +inf.
    """
    _check_args(eps, delta)
    tab = _tables or dyn_score_tables(mdp, target, eps, delta, tol)
    c = tab.c_feas
    return c, bool(np.all(c >= eps - tol.tie))


def violating_pairs(c, eps, tol=DEFAULT):
    return [tuple(int(i) for i in ij) for ij in np.argwhere(c < eps - tol.tie)]


def sufficient_condition(mdp, target, eps, delta=DEFAULT_DELTA, tol=DEFAULT, _tables=None):
    """Per-pair test ``beta >= eps * (1 + D)`` or ``chi = 0`` over all non-target pairs."""
    _check_args(eps, delta)
    tab = _tables or dyn_score_tables(mdp, target, eps, delta, tol)
    return bool(np.all(_sufficient_pairs(mdp, target, tab, tol)))


def _sufficient_pairs(mdp, target, tab, tol):
    ok = (tab.beta >= tab.eps * (1 + tab.diameter) - tol.tie) | (tab.chi <= 0)
    ok[target_mask(mdp, target)] = True
    return ok


def dynamics_bounds(mdp, target, eps, delta=DEFAULT_DELTA, p=np.inf, tol=DEFAULT,
                    _tables=None):
    """Lower and upper cost bounds for dynamics poisoning.

    ``lower = (delta * alpha / 2) * ||chi_0||_inf / ||V||_inf`` (0 when
    ``chi_0 = 0``); ``upper = 2 ||Lambda||_p`` when the sufficient
    condition holds, else +inf.
    """
    _check_args(eps, delta)
    p = parse_p(p)
    tab = _tables or dyn_score_tables(mdp, target, eps, delta, tol)
    chi0 = lp_norm(tab.chi0, np.inf)
    if chi0 == 0:
        lower = 0.0
    elif tab.v_inf == 0:
        lower = np.inf
    else:
        lower = 0.5 * delta * tab.alpha * chi0 / tab.v_inf
    if sufficient_condition(mdp, target, eps, delta, tol, tab):
        upper = 2.0 * lp_norm(tab.lam, p)
    else:
        upper = np.inf
    return lower, upper


def row_constraints(mdp, target, tab, s, a):
    """Polyhedron of admissible poisoned rows for the non-target pair ``(s, a)``."""
    n_s = mdp.n_states
    t = target[s]
    rhs = mdp.rewards[s, t] + tab.b_next[s] - mdp.rewards[s, a] - tab.eps
    floor = tab.delta * mdp.transitions[s, a]
    return LinearProgram.feasibility(
        n_s, ineq_lhs=tab.u[s][None, :], ineq_rhs=[rhs],
        eq_lhs=np.ones((1, n_s)), eq_rhs=[1.0], lower=floor, upper=np.inf)


def row_violation(mdp, target, tab, s, a, row):
    return row_constraints(mdp, target, tab, s, a).violation(np.asarray(row, dtype=float))


def _aggregate(mdp, p_hat, reference, p):
    per_row = np.abs(p_hat - reference).sum(axis=2)
    return per_row, lp_norm(per_row, p)


def _verify(mdp, p_hat, target, eps, tol, what):
    m_hat = mdp.with_transitions(p_hat)
    if not is_eps_robust_optimal(m_hat, target, eps, tol):
        raise SolverFailure(f"{what}: target is not {eps}-robust optimal after the attack")
    return m_hat


def _clean_rows(p_hat):
    # simplex round-off: clip tiny negatives and renormalise
    p_hat = np.maximum(p_hat, 0.0)
    return p_hat / p_hat.sum(axis=2, keepdims=True)


def _solve_rows(mdp, target, tab, tol):
    """Per-row l1 LPs on ``mdp``; returns (p_hat, infeasible pairs)."""
    p_hat = np.array(mdp.transitions, dtype=float)
    bad = []
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            if a == target[s]:
                continue
            base = mdp.transitions[s, a]
            cons = row_constraints(mdp, target, tab, s, a)
            rep = min_lp_norm_to_point(base, 1, cons, tol)
            if rep.status == "Infeasible":
                bad.append((s, a))
                continue
            if not rep.ok:
                raise SolverFailure(f"row LP for (s={s}, a={a}) returned {rep.status}")
            if rep.objective > 0:
                p_hat[s, a] = rep.solution
    if not bad:
        fixed = _clean_rows(p_hat)
        # restore untouched rows bit-exactly
        touched = np.any(p_hat != mdp.transitions, axis=2, keepdims=True)
        p_hat = np.where(touched, fixed, mdp.transitions)
    return p_hat, bad


def attack_dynamics_nontarget(mdp, target, eps, delta=DEFAULT_DELTA, p=np.inf,
                              tol=DEFAULT, _tables=None, reference=None):
    """Cheapest dynamics poisoning that leaves every target row untouched.

    Returns ``feasible=False`` (with the violating pairs) when some
    ``C(s, a) < eps``.  ``reference`` is the kernel costs are measured
    against; by default the kernel of ``mdp`` itself.
    """
    _check_args(eps, delta)
    p = parse_p(p)
    target.validate(mdp)
    tab = _tables or dyn_score_tables(mdp, target, eps, delta, tol)
    ref = mdp.transitions if reference is None else np.asarray(reference)
    lower, upper = dynamics_bounds(mdp, target, eps, delta, p, tol, tab)
    c, ok = feasibility_table(mdp, target, eps, delta, tol, tab)
    if not ok:
        nan_rows = np.full((mdp.n_states, mdp.n_actions), np.nan)
        return DynAttackResult(
            p_hat=np.array(mdp.transitions), cost=np.inf, p=p, feasible=False,
            per_row_cost=nan_rows, lower_bound=lower, upper_bound=upper, mode=NONTARGET,
            base=mdp, violations=violating_pairs(c, eps, tol), info={"tables": tab})
    p_hat, bad = _solve_rows(mdp, target, tab, tol)
    if bad:
        raise Infeasible(f"row LPs infeasible at {bad} although C >= eps", bad)
    _verify(mdp, p_hat, target, eps, tol, "non-target dynamics attack")
    per_row, cost = _aggregate(mdp, p_hat, ref, p)
    return DynAttackResult(p_hat=p_hat, cost=cost, p=p, feasible=True, per_row_cost=per_row,
                           lower_bound=lower, upper_bound=upper, mode=NONTARGET, base=mdp,
                           info={"tables": tab})


def attack_dynamics_constructive(mdp, target, eps, delta=DEFAULT_DELTA, p=np.inf, tol=DEFAULT):
    """Mix each non-target row toward the lowest-bias state with weight Lambda.

    ``P'(s,a) = (1 - Lambda) P(s,a) + Lambda (delta P(s,a) + (1 - delta) e_sink)``.
    Raises :class:`PreconditionFailed` unless the sufficient condition holds.
    """
    _check_args(eps, delta)
    p = parse_p(p)
    target.validate(mdp)
    tab = dyn_score_tables(mdp, target, eps, delta, tol)
    ok = _sufficient_pairs(mdp, target, tab, tol)
    if not np.all(ok):
        bad = [tuple(int(i) for i in ij) for ij in np.argwhere(~ok)]
        raise PreconditionFailed(f"sufficient condition fails at {bad}")
    p_bar = mdp.transitions
    sink = np.zeros(mdp.n_states)
    sink[tab.sink] = 1.0
    lam = tab.lam[:, :, None]
    p_hat = (1 - lam) * p_bar + lam * (delta * p_bar + (1 - delta) * sink)
    p_hat = np.where(lam > 0, p_hat, p_bar)
    p_hat[np.arange(mdp.n_states), target.actions] = p_bar[np.arange(mdp.n_states),
                                                           target.actions]
    lower, upper = dynamics_bounds(mdp, target, eps, delta, p, tol, tab)
    _verify(mdp, p_hat, target, eps, tol, "constructive dynamics attack")
    per_row, cost = _aggregate(mdp, p_hat, p_bar, p)
    return DynAttackResult(p_hat=p_hat, cost=cost, p=p, feasible=True, per_row_cost=per_row,
                           lower_bound=lower, upper_bound=upper, mode=CONSTRUCTIVE, base=mdp,
                           info={"tables": tab})


def candidate_pool(mdp, target, delta, pool_size, seed, tol=DEFAULT, temperature=None,
                   max_tries=None):
    """Kernels differing from ``mdp`` only on target rows, each raising the target's gain.

    Index 0 is the original kernel.  Each further candidate moves a
    Uniform(0, 1 - delta) fraction of one target row's free mass
    ``(1 - delta) P(s, target(s))`` onto a successor drawn with weights
    ``exp(V / temperature)``; candidates whose chain is not ergodic or
    whose gain does not increase are redrawn.
    """
    if pool_size < 1:
        raise DomainError("pool_size must be at least 1")
    rng = np.random.default_rng(seed)
    stats = bias_and_q(mdp, target, tol)
    v = stats.bias_v
    span = float(v.max() - v.min())
    temp = span / 2 if temperature is None else float(temperature)
    if temp > 0:
        w = np.exp((v - v.max()) / temp)
    else:
        w = np.ones_like(v)
    w = w / w.sum()
    n_s = mdp.n_states
    pool = [np.array(mdp.transitions)]
    tries = 0
    cap = max_tries if max_tries is not None else 50 * pool_size
    while len(pool) < pool_size and tries < cap:
        tries += 1
        s = int(rng.integers(n_s))
        j = int(rng.choice(n_s, p=w))
        frac = rng.uniform(0.0, 1.0 - delta)
        p = np.array(mdp.transitions)
        row = p[s, target[s]]
        row_new = row + frac * (1 - delta) * (np.eye(n_s)[j] - row)
        p[s, target[s]] = row_new / row_new.sum()
        kern = p[np.arange(n_s), target.actions]
        if not chain_is_ergodic(kern):
            continue
        cand = mdp.with_transitions(p)
        if gain(cand, target, tol) <= stats.gain + tol.tie:
            continue
        pool.append(p)
    return pool


def attack_dynamics_general(mdp, target, eps, delta=DEFAULT_DELTA, p=np.inf, pool_size=32,
                            seed=0, tol=DEFAULT, temperature=None):
    """Pool heuristic for dynamics poisoning that may also change target rows.

    Each pool kernel is used as the base of the non-target attack and the
    total distance to the original kernel is compared; the cheapest
    feasible candidate wins, ties to the lowest pool index.  Raises
    :class:`Infeasible` if no candidate admits an attack.
    """
    _check_args(eps, delta)
    p = parse_p(p)
    target.validate(mdp)
    pool = candidate_pool(mdp, target, delta, pool_size, seed, tol, temperature)
    best = None
    best_idx = -1
    violations = []
    for idx, kern in enumerate(pool):
        cand = mdp.with_transitions(kern)
        res = attack_dynamics_nontarget(cand, target, eps, delta, p, tol,
                                        reference=mdp.transitions)
        if not res.feasible:
            if idx == 0:
                violations = res.violations
            continue
        if np.any(res.p_hat < delta * mdp.transitions - tol.tie):
            continue
        if best is None or res.cost < best.cost - 1e-12:
            best, best_idx = res, idx
    tab0 = dyn_score_tables(mdp, target, eps, delta, tol)
    lower, upper = dynamics_bounds(mdp, target, eps, delta, p, tol, tab0)
    if best is None:
        raise Infeasible(f"no pool candidate (of {len(pool)}) admits an attack", violations)
    _verify(mdp, best.p_hat, target, eps, tol, "pool dynamics attack")
    per_row, cost = _aggregate(mdp, best.p_hat, mdp.transitions, p)
    return DynAttackResult(p_hat=best.p_hat, cost=cost, p=p, feasible=True,
                           per_row_cost=per_row, lower_bound=lower, upper_bound=upper,
                           mode=GENERAL_POOL, base=mdp,
                           info={"candidate": best_idx, "pool": len(pool), "tables": tab0})

