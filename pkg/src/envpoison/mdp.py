"""Tabular MDP and deterministic-policy containers, plus text serialization."""
import json
import math
from dataclasses import dataclass
from functools import reduce
from itertools import product

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .config import DEFAULT
from .errors import DimensionMismatch, DomainError


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Mdp:
    """Tabular MDP ``(S, A, R, P)``.

    Parameters
    ----------
    rewards : array_like, shape (S, A)
    transitions : array_like, shape (S, A, S)
        Each ``transitions[s, a]`` must be a probability vector.
    """

    rewards: np.ndarray
    transitions: np.ndarray

    def __post_init__(self):
        r = _frozen(self.rewards)
        p = _frozen(self.transitions)
        if r.ndim != 2 or p.ndim != 3:
            raise DomainError("rewards must be (S, A) and transitions (S, A, S)")
        n_s, n_a = r.shape
        if p.shape != (n_s, n_a, n_s):
            raise DimensionMismatch(
                f"transitions shape {p.shape} does not match rewards {r.shape}")
        if n_s < 1 or n_a < 1:
            raise DomainError("need at least one state and one action")
        if not np.all(np.isfinite(r)):
            raise DomainError("rewards must be finite")
        tol = DEFAULT.stochastic
        if np.any(p < -tol) or np.any(p > 1 + tol):
            raise DomainError("transition entries must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=2) - 1.0)) > tol:
            raise DomainError("every transition row must sum to 1")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "transitions", p)

    @property
    def n_states(self):
        return self.rewards.shape[0]

    @property
    def n_actions(self):
        return self.rewards.shape[1]

    def with_rewards(self, rewards):
        return Mdp(rewards, self.transitions)

    def with_transitions(self, transitions):
        return Mdp(self.rewards, transitions)

    def same_shape(self, other):
        return self.rewards.shape == other.rewards.shape

    # -- serialization -------------------------------------------------

    def to_dict(self):
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "rewards": self.rewards.ravel().tolist(),
            "transitions": self.transitions.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        n_s, n_a = int(doc["n_states"]), int(doc["n_actions"])
        r = np.asarray(doc["rewards"], dtype=float).reshape(n_s, n_a)
        p = np.asarray(doc["transitions"], dtype=float).reshape(n_s, n_a, n_s)
        return cls(r, p)

    def dumps(self, extra=None):
        """Serialize to the text format (JSON, floats at 17 significant digits)."""
        doc = self.to_dict()
        if extra:
            doc = {**extra, **doc}
        return dumps_document(doc)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path, extra=None):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps(extra))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _fmt_float(x):
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if math.isnan(x):
        return '"nan"'
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps_document(doc, indent=2):
    """JSON text with every float written at 17 significant digits."""
    return _encode(doc, indent, 0) + "\n"


@dataclass(frozen=True, eq=False)
class DetPolicy:
    """Deterministic stationary policy, ``actions[s]`` is the action at ``s``."""

    actions: np.ndarray

    def __post_init__(self):
        a = _frozen(self.actions, dtype=np.int64)
        if a.ndim != 1:
            raise DomainError("policy must be a 1-D array of actions")
        object.__setattr__(self, "actions", a)

    def __len__(self):
        return self.actions.shape[0]

    def __getitem__(self, s):
        return int(self.actions[s])

    def __eq__(self, other):
        return isinstance(other, DetPolicy) and np.array_equal(self.actions, other.actions)

    def __hash__(self):
        return hash(self.actions.tobytes())

    def __repr__(self):
        return f"DetPolicy({self.actions.tolist()})"

    def validate(self, mdp):
        if len(self) != mdp.n_states:
            raise DimensionMismatch("policy length differs from n_states")
        if np.any(self.actions < 0) or np.any(self.actions >= mdp.n_actions):
            raise DomainError("policy action out of range")
        return self

    @classmethod
    def constant(cls, n_states, action):
        return cls(np.full(n_states, action))


def neighbor(policy, s, a):
    """Policy equal to ``policy`` except that it plays ``a`` at state ``s``."""
    acts = policy.actions.copy()
    acts[s] = a
    return DetPolicy(acts)


def neighbors(policy, n_actions):
    """Yield ``(s, a, neighbor)`` for every ``a != policy(s)``."""
    for s in range(len(policy)):
        for a in range(n_actions):
            if a != policy[s]:
                yield s, a, neighbor(policy, s, a)


def all_policies(n_states, n_actions):
    """Enumerate all ``n_actions ** n_states`` deterministic policies."""
    for acts in product(range(n_actions), repeat=n_states):
        yield DetPolicy(np.array(acts))


def policy_kernel(mdp, policy):
    """Row-stochastic matrix ``P(s, policy(s), .)``."""
    idx = np.arange(mdp.n_states)
    return mdp.transitions[idx, policy.actions]


def policy_rewards(mdp, policy):
    idx = np.arange(mdp.n_states)
    return mdp.rewards[idx, policy.actions]


def chain_is_ergodic(kernel):
    """Irreducible and aperiodic test on the support graph of a stochastic matrix."""
    n = kernel.shape[0]
    if n == 1:
        return True
    adj = kernel > 0
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    if n_comp != 1:
        return False
    # period = gcd over edges (u, v) of level(u) + 1 - level(v), BFS levels from 0
    order, pred = breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    level = np.zeros(n, dtype=np.int64)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    us, vs = np.nonzero(adj)
    diffs = np.abs(level[us] + 1 - level[vs])
    period = reduce(math.gcd, diffs.tolist(), 0)
    return period == 1


def check_ergodic(mdp, policy):
    """True iff the chain induced by ``policy`` is irreducible and aperiodic."""
    policy.validate(mdp)
    return chain_is_ergodic(policy_kernel(mdp, policy))
