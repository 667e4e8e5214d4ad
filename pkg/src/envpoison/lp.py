"""Small dense linear programs and l_p projections onto polyhedra.

:func:`solve_lp` is a two-phase tableau simplex (Dantzig pricing, switching
to Bland's rule after a run of degenerate pivots).  :func:`min_lp_norm_to_point`
minimises ``||x - base||_p`` over a polyhedron: p in {1, inf} through an LP
with auxiliary variables, p = 2 through Dykstra's alternating projections.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .config import DEFAULT
from .errors import DomainError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
NO_CONVERGENCE = "NoConvergence"


class Status(str, Enum):
    Optimal = OPTIMAL
    Infeasible = INFEASIBLE
    Unbounded = UNBOUNDED
    NoConvergence = NO_CONVERGENCE


def _mat(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, n))
    return a


def _vec(b, m):
    if b is None:
        return np.zeros(m)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lower <= x <= upper``."""

    objective: np.ndarray
    eq_lhs: np.ndarray = None
    eq_rhs: np.ndarray = None
    ineq_lhs: np.ndarray = None
    ineq_rhs: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        n = c.shape[0]
        a_eq = _mat(self.eq_lhs, n)
        a_ub = _mat(self.ineq_lhs, n)
        b_eq = _vec(self.eq_rhs, a_eq.shape[0])
        b_ub = _vec(self.ineq_rhs, a_ub.shape[0])
        lo = np.zeros(n) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.full(n, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (n,)).copy()
        if a_eq.shape[1] != n or a_ub.shape[1] != n:
            raise DomainError("constraint matrices must have one column per variable")
        if b_eq.shape[0] != a_eq.shape[0] or b_ub.shape[0] != a_ub.shape[0]:
            raise DomainError("right-hand sides must match constraint rows")
        if np.any(lo > hi):
            raise DomainError("lower bounds must not exceed upper bounds")
        for name, val in (("objective", c), ("eq_lhs", a_eq), ("eq_rhs", b_eq),
                          ("ineq_lhs", a_ub), ("ineq_rhs", b_ub), ("lower", lo),
                          ("upper", hi)):
            object.__setattr__(self, name, val)

    @property
    def n_vars(self):
        return self.objective.shape[0]

    @classmethod
    def feasibility(cls, n_vars, **constraints):
        """Constraint set with a zero objective (input to the norm minimisers)."""
        return cls(np.zeros(n_vars), **constraints)

    def violation(self, x):
        """Largest violation of any constraint or bound at ``x``."""
        v = 0.0
        if self.eq_lhs.shape[0]:
            v = max(v, float(np.max(np.abs(self.eq_lhs @ x - self.eq_rhs))))
        if self.ineq_lhs.shape[0]:
            v = max(v, float(np.max(self.ineq_lhs @ x - self.ineq_rhs, initial=0.0)))
        v = max(v, float(np.max(self.lower - x, initial=0.0)))
        v = max(v, float(np.max(x - self.upper, initial=0.0)))
        return v


@dataclass(eq=False)
class SolveReport:
    status: str
    solution: np.ndarray = None
    objective: float = float("nan")
    max_violation: float = float("inf")
    iterations: int = 0
    kkt_residual: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == OPTIMAL


# ----------------------------------------------------------------------------
# simplex


class _Tableau:
    """Dense tableau ``[A | b]`` with an explicit basis and cost row."""

    def __init__(self, a, b, basis, tol):
        self.t = np.hstack([a, b[:, None]])
        self.basis = list(basis)
        self.tol = tol
        self.iterations = 0

    @property
    def m(self):
        return self.t.shape[0]

    def pivot(self, row, col):
        t = self.t
        t[row] /= t[row, col]
        colv = t[:, col].copy()
        colv[row] = 0.0
        t -= np.outer(colv, t[row])
        self.basis[row] = col

    def run(self, cost, allowed):
        """Minimise ``cost . x`` over the columns flagged in ``allowed``.

        Returns one of OPTIMAL, UNBOUNDED, NO_CONVERGENCE.
        """
        tol = self.tol
        n = self.t.shape[1] - 1
        streak = 0
        last_obj = np.inf
        while True:
            if self.iterations >= tol.lp_max_iter:
                return NO_CONVERGENCE
            cb = cost[self.basis]
            reduced = cost - cb @ self.t[:, :n]
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0
            candidates = np.nonzero(reduced < -tol.lp_pivot)[0]
            if candidates.size == 0:
                return OPTIMAL
            bland = streak >= tol.degeneracy_streak
            col = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])
            colv = self.t[:, col]
            pos = colv > tol.lp_pivot
            if not np.any(pos):
                return UNBOUNDED
            ratios = np.full(self.m, np.inf)
            ratios[pos] = self.t[pos, -1] / colv[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
            # lowest basic-variable index among ties (Bland), else largest pivot
            if bland:
                row = int(min(ties, key=lambda r: self.basis[r]))
            else:
                row = int(ties[np.argmax(colv[ties])])
            self.pivot(row, col)
            self.iterations += 1
            obj = float(cb @ self.t[:, -1])
            if obj < last_obj - 1e-12:
                streak = 0
                last_obj = obj
            else:
                streak += 1


def _standard_form(lp):
    """Rewrite ``lp`` as ``min c'y, A y = b, y >= 0`` with ``x = offset + M y``.

    Returns ``(c, A, b, offset, M, slack_rows)`` where ``slack_rows[i]`` is
    the column of a +1 slack usable as an initial basic variable (or -1).
    """
    n = lp.n_vars
    cols = []          # (var index, sign) for each structural y column
    offset = np.zeros(n)
    extra_ub_rows = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_ub_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    m_map = np.zeros((n, ny))
    for k, (j, sgn) in enumerate(cols):
        m_map[j, k] = sgn

    a_ub = lp.ineq_lhs @ m_map
    b_ub = lp.ineq_rhs - lp.ineq_lhs @ offset
    if extra_ub_rows:
        extra = np.zeros((len(extra_ub_rows), ny))
        for i, (k, width) in enumerate(extra_ub_rows):
            extra[i, k] = 1.0
        a_ub = np.vstack([a_ub, extra])
        b_ub = np.concatenate([b_ub, [w for _, w in extra_ub_rows]])
    a_eq = lp.eq_lhs @ m_map
    b_eq = lp.eq_rhs - lp.eq_lhs @ offset

    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    a = np.zeros((m_ub + m_eq, ny + m_ub))
    a[:m_ub, :ny] = a_ub
    a[:m_ub, ny:] = np.eye(m_ub)
    a[m_ub:, :ny] = a_eq
    b = np.concatenate([b_ub, b_eq])
    slack_rows = np.full(m_ub + m_eq, -1)
    slack_rows[:m_ub] = ny + np.arange(m_ub)
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1
    slack_rows[neg] = -1
    c = np.concatenate([m_map.T @ lp.objective, np.zeros(m_ub)])
    return c, a, b, offset, m_map, slack_rows


def solve_lp(lp, tol=DEFAULT):
    """Solve a :class:`LinearProgram` with the two-phase dense simplex."""
    c, a, b, offset, m_map, slack_rows = _standard_form(lp)
    m, n = a.shape
    ny = m_map.shape[1]

    if m == 0:
        # only bounds: each y >= 0 independently
        if np.any(c < -tol.lp_pivot):
            return SolveReport(UNBOUNDED)
        x = offset.copy()
        return SolveReport(OPTIMAL, x, float(lp.objective @ x), lp.violation(x), 0, 0.0)

    need_art = np.nonzero(slack_rows < 0)[0]
    n_art = need_art.size
    full = np.zeros((m, n + n_art))
    full[:, :n] = a
    full[need_art, n + np.arange(n_art)] = 1.0
    basis = slack_rows.copy()
    basis[need_art] = n + np.arange(n_art)
    tab = _Tableau(full, b.copy(), basis, tol)

    allowed = np.ones(n + n_art, dtype=bool)
    if n_art:
        cost1 = np.zeros(n + n_art)
        cost1[n:] = 1.0
        status = tab.run(cost1, allowed)
        if status == NO_CONVERGENCE:
            return SolveReport(NO_CONVERGENCE, iterations=tab.iterations)
        phase1 = float(tab.t[:, -1] @ cost1[tab.basis])
        if phase1 > tol.lp_phase1:
            return SolveReport(INFEASIBLE, iterations=tab.iterations,
                               info={"phase1_objective": phase1})
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = []
        for r in range(tab.m):
            if tab.basis[r] >= n:
                row = tab.t[r, :n]
                cand = np.nonzero(np.abs(row) > tol.lp_pivot)[0]
                if cand.size:
                    tab.pivot(r, int(cand[np.argmax(np.abs(row[cand]))]))
                    keep.append(r)
            else:
                keep.append(r)
        tab.t = tab.t[keep][:, list(range(n)) + [n + n_art]]
        tab.basis = [tab.basis[r] for r in keep]
    allowed = np.ones(n, dtype=bool)
    status = tab.run(c, allowed)
    if status != OPTIMAL:
        return SolveReport(status, iterations=tab.iterations)
    y = np.zeros(n)
    y[tab.basis] = tab.t[:, -1]
    y = np.maximum(y, 0.0)
    x = offset + m_map @ y[:ny]
    viol = lp.violation(x)
    report = SolveReport(OPTIMAL, x, float(lp.objective @ x), viol, tab.iterations, 0.0)
    if viol > tol.lp_feas:
        report.status = NO_CONVERGENCE
        report.info["reason"] = f"constraint violation {viol:.3g} after simplex"
    return report


# ----------------------------------------------------------------------------
# l_p projections


def _is_feasible(constraints, x, slack=0.0):
    return constraints.violation(x) <= slack


def _roundoff(constraints):
    scale = max([1.0] + [float(np.max(np.abs(v))) for v in
                         (constraints.eq_rhs, constraints.ineq_rhs) if v.size])
    return 1e-12 * scale


def _lift_l1(constraints, base):
    """Split LP in ``(d_plus, d_minus)`` with ``x = base + d_plus - d_minus``.

    Box bounds become variable bounds when ``base`` lies inside the box.
    """
    n = base.shape[0]
    a_eq = np.hstack([constraints.eq_lhs, -constraints.eq_lhs])
    a_ub = np.hstack([constraints.ineq_lhs, -constraints.ineq_lhs])
    b_eq = constraints.eq_rhs - constraints.eq_lhs @ base
    b_ub = constraints.ineq_rhs - constraints.ineq_lhs @ base
    lo, hi = constraints.lower, constraints.upper
    inside = (lo <= base) & (base <= hi)
    up_plus = np.where(inside, hi - base, np.inf)
    up_minus = np.where(inside, base - lo, np.inf)
    rows, rhs = [], []
    eye = np.eye(n)
    for j in np.nonzero(~inside)[0]:
        # lo <= base + d+ - d- <= hi as explicit rows
        if np.isfinite(lo[j]):
            rows.append(np.concatenate([-eye[j], eye[j]]))
            rhs.append(base[j] - lo[j])
        if np.isfinite(hi[j]):
            rows.append(np.concatenate([eye[j], -eye[j]]))
            rhs.append(hi[j] - base[j])
    if rows:
        a_ub = np.vstack([a_ub, np.array(rows)])
        b_ub = np.concatenate([b_ub, rhs])
    return LinearProgram(np.ones(2 * n), a_eq, b_eq, a_ub, b_ub,
                         np.zeros(2 * n), np.concatenate([up_plus, up_minus]))


def _lift_linf(constraints, base):
    """LP in ``(x, z)`` minimising ``z`` with ``|x - base| <= z`` entrywise."""
    n = base.shape[0]
    eye = np.eye(n)
    col = -np.ones((n, 1))
    ub = np.vstack([np.hstack([eye, col]), np.hstack([-eye, col])])
    rhs = np.concatenate([base, -base])
    pad = lambda mat: np.hstack([mat, np.zeros((mat.shape[0], 1))])  # noqa: E731
    return LinearProgram(
        objective=np.concatenate([np.zeros(n), [1.0]]),
        eq_lhs=pad(constraints.eq_lhs), eq_rhs=constraints.eq_rhs,
        ineq_lhs=np.vstack([pad(constraints.ineq_lhs), ub]),
        ineq_rhs=np.concatenate([constraints.ineq_rhs, rhs]),
        lower=np.concatenate([constraints.lower, [0.0]]),
        upper=np.concatenate([constraints.upper, [np.inf]]),
    )


def lp_norm(v, p):
    """``||v||_p`` for p in {0, 1, 2, inf}; p = 0 counts entries above 1e-12."""
    v = np.abs(np.asarray(v, dtype=float).ravel())
    if v.size == 0:
        return 0.0
    if p == 0:
        return float(np.count_nonzero(v > 1e-12))
    if p == np.inf:
        return float(v.max())
    if p == 1:
        return float(v.sum())
    return float(np.sum(v ** p) ** (1.0 / p))


def parse_p(p):
    """Accept 0, 1, 2, inf and their string spellings."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infinity", "linf", "max"):
            return np.inf
        p = float(key)
    p = float(p)
    if p not in (0.0, 1.0, 2.0, np.inf):
        raise DomainError(f"unsupported norm p={p}")
    return np.inf if p == np.inf else int(p)


def min_lp_norm_to_point(base, p, constraints, tol=DEFAULT):
    """Minimise ``||x - base||_p`` over the polyhedron ``constraints``.

    ``constraints`` is a :class:`LinearProgram` whose objective is ignored.
    """
    base = np.asarray(base, dtype=float).reshape(-1)
    p = parse_p(p)
    if p == 0:
        raise DomainError("p = 0 is not a convex objective")
    if constraints.n_vars != base.shape[0]:
        raise DomainError("base and constraints have different dimensions")
    if _is_feasible(constraints, base, _roundoff(constraints)):
        # violations at round-off level count as feasible
        return SolveReport(OPTIMAL, base.copy(), 0.0, constraints.violation(base), 0, 0.0)
    if p == 2:
        return _project_l2(base, constraints, tol)
    n = base.shape[0]
    if p == 1:
        rep = solve_lp(_lift_l1(constraints, base), tol)
        if not rep.ok:
            return rep
        x = base + rep.solution[:n] - rep.solution[n:]
    else:
        rep = solve_lp(_lift_linf(constraints, base), tol)
        if not rep.ok:
            return rep
        x = rep.solution[:n]
    return SolveReport(OPTIMAL, x, lp_norm(x - base, p), constraints.violation(x),
                       rep.iterations, 0.0)


def _project_l2(base, cons, tol):
    x, iters, converged = kernels.dykstra(
        base, cons.ineq_lhs, cons.ineq_rhs, cons.eq_lhs, cons.eq_rhs,
        cons.lower, cons.upper, tol.dykstra_tol, tol.dykstra_max_iter)
    polished, resid = _polish_l2(base, x, cons, tol)
    if polished is not None:
        x = polished
    else:
        resid = _kkt_residual(base, x, cons)
    viol = cons.violation(x)
    info = {"dykstra_iterations": iters, "polished": polished is not None}
    if not converged and polished is None:
        return SolveReport(NO_CONVERGENCE, x, lp_norm(x - base, 2), viol, iters, resid, info)
    return SolveReport(OPTIMAL, x, lp_norm(x - base, 2), viol, iters, resid, info)


def _all_rows(cons):
    n = cons.n_vars
    eye = np.eye(n)
    fin_lo = np.isfinite(cons.lower)
    fin_hi = np.isfinite(cons.upper)
    g = np.vstack([cons.ineq_lhs, -eye[fin_lo], eye[fin_hi]])
    h = np.concatenate([cons.ineq_rhs, -cons.lower[fin_lo], cons.upper[fin_hi]])
    return g, h


def _polish_l2(base, x, cons, tol, act_tol=1e-6):
    """Exact projection on the active set guessed from the Dykstra iterate.

    Solves ``min ||y - base||^2`` with the near-active inequalities and all
    equalities held tight; accepted only if it is feasible and the inequality
    multipliers are nonnegative (the KKT conditions).
    """
    g, h = _all_rows(cons)
    scale = np.maximum(1.0, np.abs(h))
    active = np.nonzero(g @ x - h >= -act_tol * scale)[0]
    a = np.vstack([g[active], cons.eq_lhs])
    rhs = np.concatenate([h[active], cons.eq_rhs])
    n_ineq = active.size
    if a.shape[0] == 0:
        return None, np.nan
    # y = base - a^T lam,  (a a^T) lam = a base - rhs
    lam, *_ = np.linalg.lstsq(a @ a.T, a @ base - rhs, rcond=None)
    y = base - a.T @ lam
    if cons.violation(y) > 1e-12 * max(1.0, float(np.max(np.abs(rhs)))):
        return None, np.nan
    if np.any(lam[:n_ineq] < -1e-10):
        return None, np.nan
    resid = max(float(np.max(np.abs(a @ y - rhs))), float(np.max(np.abs(y - base + a.T @ lam))))
    return y, resid


def _kkt_residual(base, x, cons, act_tol=1e-6):
    """Stationarity residual with least-squares multipliers on the near-active set."""
    g, h = _all_rows(cons)
    active = np.nonzero(g @ x - h >= -act_tol)[0]
    a = np.vstack([g[active], cons.eq_lhs])
    if a.shape[0] == 0:
        return float(np.linalg.norm(x - base))
    lam, *_ = np.linalg.lstsq(a.T, base - x, rcond=None)
    n_ineq = active.size
    lam[:n_ineq] = np.maximum(lam[:n_ineq], 0.0)
    return max(float(np.linalg.norm(x - base + a.T @ lam)), cons.violation(x))
