"""Timing of the compiled kernels against the numpy fallback."""
import time

import numpy as np

from . import kernels
from .envs import build_chain_env
from .experiments import default_reward_range
from .learners import Ucrl2
from .online import cumulative_kernel, step_uniforms


def _best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _evi_case(n_states, n_actions, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    radius = np.full((n_states, n_actions), 0.3)
    r = rng.random((n_states, n_actions))
    return p, radius, r


def _dykstra_case(n, m, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(m, n))
    h = np.abs(rng.normal(size=m))
    base = rng.normal(size=n) * 3
    return base, g, h, np.zeros((1, n)), np.zeros(1), np.full(n, -5.0), np.full(n, 5.0)


def kernel_benchmarks(horizon=50_000, repeat=3, seed=0):
    """Rows ``(kernel, backend, seconds)``; the python row always runs."""
    names = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    mdp = build_chain_env(-2.5)
    cdf = cumulative_kernel(mdp.transitions)
    rewards = np.ascontiguousarray(mdp.rewards)
    uniforms = step_uniforms(seed, horizon)
    rr = default_reward_range(mdp.rewards)
    p, radius, r = _evi_case(20, 3, seed)
    dyk = _dykstra_case(12, 20, seed)
    rows = []
    for name in names:
        mod = kernels.get_backend(name)

        def rollout():
            lr = Ucrl2(mdp.n_states, mdp.n_actions, reward_range=rr, backend=mod)
            out = [np.zeros(horizon, dtype=np.int64), np.zeros(horizon, dtype=np.int64),
                   np.zeros(horizon), np.zeros(horizon, dtype=np.int64)]
            lr.rollout(cdf, rewards, 0, uniforms, *out)
            return out[0]

        sec, _ = _best_of(rollout, repeat)
        rows.append((f"ucrl2 rollout T={horizon}", name, sec))
        sec, _ = _best_of(lambda: mod.evi(p, radius, r, 0.01, 1e-6, 100_000), repeat)
        rows.append(("evi S=20 A=3", name, sec))
        sec, _ = _best_of(lambda: mod.dykstra(*dyk, 1e-8, 200_000), repeat)
        rows.append(("dykstra n=12 m=20", name, sec))
    return rows


def format_rows(rows):
    lines = [f"{'kernel':<26} {'backend':<9} {'seconds':>10}"]
    for kern, name, sec in rows:
        lines.append(f"{kern:<26} {name:<9} {sec:>10.4f}")
    by = {}
    for kern, name, sec in rows:
        by.setdefault(kern, {})[name] = sec
    for kern, d in by.items():
        if "compiled" in d and d["compiled"] > 0:
            lines.append(f"speedup {kern}: {d['python'] / d['compiled']:.1f}x")
    return "\n".join(lines) + "\n"
