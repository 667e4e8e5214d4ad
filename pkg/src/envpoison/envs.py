"""Canonical test environments: the 4-state chain and the 9-state grid.

Both use the same noise model: with probability 0.9 the chosen move
succeeds, with probability 0.1 the next state is uniform over all states.
"""
import numpy as np

from .errors import DomainError
from .mdp import DetPolicy, Mdp

SUCCESS = 0.9
LEFT, RIGHT = 0, 1

# 3x3 grid, states row-major:  0 1 2 / 3 4 5 / 6 7 8.
# Action 0 follows the closed serpentine tour 0-1-2-5-4-3-6-7-8-0,
# action 1 steps to the cell below (bottom row wraps to the top).
GRID_TOUR = (1, 2, 5, 6, 3, 4, 7, 8, 0)
GRID_DOWN = (3, 4, 5, 6, 7, 8, 0, 1, 2)
GRID_ADJACENCY = (GRID_TOUR, GRID_DOWN)
GRID_TARGET = (0, 0, 0, 0, 0, 0, 0, 0, 0)


def noisy_kernel(successors, success=SUCCESS):
    """Kernel from a deterministic successor table ``successors[a][s]``.

    ``success`` of the mass goes to the successor, the rest is uniform.
    """
    succ = np.asarray(successors, dtype=np.int64)
    n_a, n_s = succ.shape
    p = np.full((n_s, n_a, n_s), (1.0 - success) / n_s)
    for a in range(n_a):
        p[np.arange(n_s), a, succ[a]] += success
    return p


def chain_layout(n_states):
    """Default left-to-right arrangement: the negative end state, then s0, s1, ...

    For four states this is ``s3 - s0 - s1 - s2``.
    """
    return (n_states - 1,) + tuple(range(n_states - 1))


def chain_successors(order):
    """``(left, right)`` successor tables for states laid out as ``order``.

    The blocked move at either end is a self-loop.
    """
    order = list(order)
    n = len(order)
    left = np.zeros(n, dtype=np.int64)
    right = np.zeros(n, dtype=np.int64)
    for i, s in enumerate(order):
        left[s] = order[i - 1] if i > 0 else s
        right[s] = order[i + 1] if i < n - 1 else s
    return np.stack([left, right])


def chain_rewards(r_s0, n_states):
    """Rewards r_s0, 0.5, ..., 0.5, -0.5 (action independent)."""
    r = np.full(n_states, 0.5)
    r[0] = r_s0
    r[-1] = -0.5
    return r


def build_chain_env(r_s0, n_states=4, order=None):
    """Linear chain with {left, right} moves.

    ``order`` lists the states from the left end to the right end and
    defaults to :func:`chain_layout`. With ``n_states=4`` the rewards are
    ``(r_s0, 0.5, 0.5, -0.5)`` for ``s0..s3``.
    """
    if not np.isfinite(r_s0):
        raise DomainError("r_s0 must be finite")
    if n_states < 2:
        raise DomainError("chain needs at least two states")
    order = chain_layout(n_states) if order is None else tuple(order)
    if sorted(order) != list(range(n_states)):
        raise DomainError("order must be a permutation of the states")
    r = chain_rewards(r_s0, n_states)
    rewards = np.repeat(r[:, None], 2, axis=1)
    return Mdp(rewards, noisy_kernel(chain_successors(order)))


def chain_target(n_states=4):
    """All-right target policy."""
    return DetPolicy.constant(n_states, RIGHT)


def grid_rewards(r_s0):
    return np.array([r_s0, -2.5, -2.5, -2.5, 1.0, 1.0, 0.0, 0.0, 0.0])


def build_grid_env(r_s0, adjacency=GRID_ADJACENCY):
    """Nine-state, two-action navigation grid.

    ``adjacency[a][s]`` is the intended successor of action ``a`` in ``s``;
    override it to reproduce a different arrow layout.
    """
    if not np.isfinite(r_s0):
        raise DomainError("r_s0 must be finite")
    succ = np.asarray(adjacency, dtype=np.int64)
    if succ.shape != (2, 9):
        raise DomainError("grid adjacency must be a 2 x 9 table")
    if np.any(succ < 0) or np.any(succ > 8):
        raise DomainError("grid adjacency entries must be states 0..8")
    r = grid_rewards(r_s0)
    return Mdp(np.repeat(r[:, None], 2, axis=1), noisy_kernel(succ))


def grid_target(actions=GRID_TARGET):
    return DetPolicy(np.asarray(actions))
