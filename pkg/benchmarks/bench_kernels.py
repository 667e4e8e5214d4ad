"""Compiled kernels versus the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--rollout-steps N] [--repeat K]``.
Also checks that both backends produce the same UCRL2 trace.
"""
import argparse

import numpy as np

from envpoison import kernels
from envpoison.bench import format_rows, kernel_benchmarks
from envpoison.envs import build_chain_env, chain_target
from envpoison.experiments import default_reward_range
from envpoison.learners import Ucrl2
from envpoison.online import run_online


def same_trace(horizon, seed=0):
    mdp = build_chain_env(-2.5)
    rr = default_reward_range(mdp.rewards)
    out = []
    for name in ("python", "compiled"):
        lr = Ucrl2(4, 2, reward_range=rr, backend=kernels.get_backend(name))
        out.append(run_online(mdp, None, chain_target(), lr, horizon, seed))
    return all(np.array_equal(getattr(out[0], f), getattr(out[1], f))
               for f in ("states", "actions", "rewards", "next_states"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rollout-steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(format_rows(kernel_benchmarks(args.rollout_steps, args.repeat)), end="")
    if kernels.compiled_available():
        print(f"identical traces: {same_trace(min(args.rollout_steps, 50_000))}")
    else:
        print("compiled kernels not built; python only")


if __name__ == "__main__":
    main()
