"""Per-(state, action) attack quantities derived from the original MDP."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain import bias_and_q, hajnal_alpha, hitting_times, neighbor_gains
from .config import DEFAULT
from .errors import DomainError


class LambdaClipWarning(UserWarning):
    """A raw Lambda ratio fell outside [0, 1] and was clipped."""


def target_mask(mdp, target):
    mask = np.zeros((mdp.n_states, mdp.n_actions), dtype=bool)
    mask[np.arange(mdp.n_states), target.actions] = True
    return mask


def chi_table(mdp, target, eps, tol=DEFAULT, _gains=None):
    """Normalised gain deficit of ``target`` against each of its neighbors.

    ``chi[s, a] = max(0, (rho(nb) - rho(target) + eps) / mu_nb(s))`` for
    ``a != target(s)`` and 0 on target actions.  Numerators within
    ``tol.tie`` of zero count as zero.
    """
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    target.validate(mdp)
    stats = bias_and_q(mdp, target, tol)
    gains = _gains if _gains is not None else neighbor_gains(mdp, target, tol)
    chi = np.zeros((mdp.n_states, mdp.n_actions))
    for (s, a), (g, mu_s) in gains.items():
        gap = g - stats.gain + eps
        # gaps inside the tie tolerance are round-off, not a deficit
        chi[s, a] = gap / mu_s if gap > tol.tie else 0.0
    return chi


@dataclass(frozen=True, eq=False)
class ScoreTables:
    """Everything the dynamics attacks and the bounds consume.

    ``c_feas`` is +inf on target actions, where the feasibility condition
    does not apply.  ``lambda_raw`` keeps the unclipped ratio and
    ``lambda_flag`` marks entries where it left [0, 1] (or had a
    nonpositive denominator) so bound checks can tell clipping happened.
    """

    eps: float
    delta: float
    chi: np.ndarray
    chi0: np.ndarray
    beta: np.ndarray
    lam: np.ndarray
    lambda_raw: np.ndarray
    lambda_flag: np.ndarray
    c_feas: np.ndarray
    u: np.ndarray
    hitting: np.ndarray
    alpha: float
    diameter: float
    b_next: np.ndarray
    bias_v: np.ndarray
    v_min: float
    v_span: float
    mu_max: float
    gain: float
    stats: object = field(repr=False, default=None)

    @property
    def v_inf(self):
        return float(np.max(np.abs(self.bias_v)))

    @property
    def sink(self):
        return int(np.argmin(self.bias_v))


def dyn_score_tables(mdp, target, eps, delta, tol=DEFAULT, warn=False):
    """Build :class:`ScoreTables` for ``target`` on ``mdp`` (the original MDP)."""
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    target.validate(mdp)
    n_s = mdp.n_states
    idx = np.arange(n_s)
    stats = bias_and_q(mdp, target, tol)
    gains = neighbor_gains(mdp, target, tol)
    chi = chi_table(mdp, target, eps, tol, gains)
    chi0 = chi_table(mdp, target, 0.0, tol, gains)
    v = stats.bias_v
    hit = hitting_times(mdp, target, tol)
    diam = float(hit.max()) if n_s > 1 else 0.0
    p_t = mdp.transitions[idx, target.actions]
    b_next = p_t @ v
    v_min = float(v.min())
    v_span = float(v.max() - v_min)
    r_t = mdp.rewards[idx, target.actions]

    beta = r_t[:, None] - mdp.rewards + b_next[:, None] - v_min - delta * v_span

    # U[s, s'] = V(s') + eps * T(s', s) for s' != s
    u = v[None, :] + eps * hit.T
    u[idx, idx] = v

    mask = target_mask(mdp, target)
    expected_u = np.einsum("sak,sk->sa", mdp.transitions, u)
    c_feas = (r_t[:, None] + b_next[:, None] - mdp.rewards
              - (1 - delta) * u.min(axis=1)[:, None] - delta * expected_u)
    c_feas[mask] = np.inf

    active = chi > 0
    num = chi0 + eps * (1 + diam)
    den = chi0 + beta
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(active, num / den, 0.0)
    flag = active & ((den <= 0) | (raw > 1) | (raw < 0))
    raw = np.where(active & (den <= 0), np.inf, raw)
    lam = np.clip(raw, 0.0, 1.0)
    if warn and np.any(flag):
        warnings.warn(f"Lambda clipped at {np.argwhere(flag).tolist()}", LambdaClipWarning,
                      stacklevel=2)

    mu_max = max((mu_s for _, mu_s in gains.values()), default=0.0)
    return ScoreTables(
        eps=float(eps), delta=float(delta), chi=chi, chi0=chi0, beta=beta, lam=lam,
        lambda_raw=raw, lambda_flag=flag, c_feas=c_feas, u=u, hitting=hit,
        alpha=hajnal_alpha(mdp), diameter=diam, b_next=b_next, bias_v=v,
        v_min=v_min, v_span=v_span, mu_max=float(mu_max), gain=stats.gain, stats=stats)


def mu_max(mdp, target, tol=DEFAULT):
    """``max over neighbors of mu_nb(s)`` at the deviating state."""
    gains = neighbor_gains(mdp, target, tol)
    return max((mu_s for _, mu_s in gains.values()), default=0.0)


def k_bound(regret, eps, mu_max, v_inf):
    """Mismatch-count bound ``(mu_max / eps) * (regret + 2 * v_inf)``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    return (mu_max / eps) * (regret + 2.0 * v_inf)
