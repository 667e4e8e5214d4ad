"""Command-line entry point.

Subcommands: ``attack``, ``sweep-offline``, ``sweep-online``, ``bench`` and
``verify``.  Settings come from an optional ``key = value`` config file;
every config key is also a flag (``--r-s0 -2.5``) and ``--set key=value``
is accepted too.  Later sources win: file, then flags, then ``--set``.

Exit codes: 0 success, 1 bad input or failed verification,
2 infeasible attack, 3 solver failure.
"""
import argparse
import sys
from dataclasses import fields

import numpy as np

from .errors import Infeasible, NoConvergence, PoisonError, SolverFailure
from .experiments import (ExperimentConfig, build_env, report_runtimes, run_attack,
                          run_offline_sweep, run_online_sweep)
from .mdp import DetPolicy, Mdp

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3

CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


class _Parser(argparse.ArgumentParser):
    # usage errors must not collide with the "infeasible" exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    p.add_argument("--config", "-c", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    g = p.add_argument_group("config keys")
    for key in CONFIG_KEYS:
        g.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar="VALUE")


def load_config(args, **forced):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    items = {k: getattr(args, "cfg_" + k) for k in CONFIG_KEYS
             if getattr(args, "cfg_" + k, None) is not None}
    for kv in args.set:
        if "=" not in kv:
            raise ValueError(f"--set expects KEY=VALUE, got {kv!r}")
        k, v = kv.split("=", 1)
        items[k.strip()] = v
    items.update(forced)
    return ExperimentConfig.from_mapping(items, base=cfg)


def _fmt(x):
    return "inf" if x == np.inf else format(float(x), ".12g")


def cmd_attack(args):
    cfg = load_config(args, setting="offline")
    name = cfg.attack[0]
    if name == "none":
        raise ValueError("attack = none has nothing to compute")
    mdp, target = build_env(cfg, cfg.r_s0[0])
    res = run_attack(name, mdp, target, cfg.eps[0], cfg, seed=cfg.seed)
    print(f"attack       {name} ({res.mode})")
    print(f"environment  {cfg.environment}  r_s0={_fmt(cfg.r_s0[0])}  eps={_fmt(cfg.eps[0])}")
    print(f"norm         p={_fmt(res.p)}")
    print(f"feasible     {res.feasible}")
    print(f"lower bound  {_fmt(res.lower_bound)}")
    print(f"upper bound  {_fmt(res.upper_bound)}")
    if not res.feasible:
        print("violations   " + " ".join(f"({s},{a})" for s, a in res.violations))
        return EXIT_INFEASIBLE
    print(f"cost         {_fmt(res.cost)}")
    if args.write:
        with open(args.write, "w", encoding="utf-8") as fh:
            fh.write(res.dumps())
        print(f"wrote        {args.write}")
    return EXIT_OK


def cmd_sweep_offline(args):
    cfg = load_config(args, setting="offline")
    rows = run_offline_sweep(cfg)
    n_bad = sum(1 for r in rows if not r[6])
    print(f"wrote {cfg.output}: {len(rows)} points, {n_bad} infeasible or failed")
    return EXIT_OK


def cmd_sweep_online(args):
    cfg = load_config(args, setting="online")
    res = run_online_sweep(cfg)
    print(f"wrote {cfg.output}")
    for name, r in res.items():
        print(f"  {name:<11} AvgMiss(T)={r['miss'][-1]:.4g}  AvgCost(T)={r['cost'][-1]:.4g}"
              f"  seeds={len(r['runs'])}")
    return EXIT_OK


def cmd_bench(args):
    from .bench import format_rows, kernel_benchmarks
    from . import kernels

    cfg = load_config(args, setting="offline")
    if not args.kernels_only:
        _, table = report_runtimes(cfg, args.large_states, not args.no_large)
        print(table, end="")
        print()
    print(f"active backend: {kernels.BACKEND_NAME}")
    print(format_rows(kernel_benchmarks(args.rollout_steps, args.repeat, cfg.seed)), end="")
    return EXIT_OK


def _read_mdp_file(path):
    import json
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    mdp = Mdp.from_dict(doc)
    target = DetPolicy(np.asarray(doc["target"])) if "target" in doc else None
    return mdp, target


def cmd_verify(args):
    from .verify import run_checks

    cfg = load_config(args)
    if args.mdp:
        mdp, target = _read_mdp_file(args.mdp)
        if cfg.target is not None:
            target = DetPolicy(np.asarray(cfg.target))
        if target is None:
            target = DetPolicy.constant(mdp.n_states, 0)
    else:
        mdp, target = build_env(cfg, cfg.r_s0[0])
    target.validate(mdp)
    checks = run_checks(mdp, target, cfg.eps[0], cfg.delta)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
    n_fail = sum(1 for _, ok, _ in checks if not ok)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_BAD_INPUT


def build_parser():
    parser = _Parser(prog="envpoison",
                     description="Optimal reward and dynamics poisoning of average-reward RL.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("attack", help="solve one offline attack and write the poisoned MDP")
    _add_config_flags(p)
    p.add_argument("--write", "-o", metavar="PATH", help="where to write the poisoned MDP")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep-offline", help="offline cost sweep over r_s0 and eps")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_offline)

    p = sub.add_parser("sweep-online", help="online mismatch and cost curves")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_online)

    p = sub.add_parser("bench", help="solver run times and kernel backend timings")
    _add_config_flags(p)
    p.add_argument("--no-large", action="store_true", help="skip the long-chain variant")
    p.add_argument("--large-states", type=int, default=100)
    p.add_argument("--kernels-only", action="store_true")
    p.add_argument("--rollout-steps", type=int, default=50_000, help="rollout length for timing")
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="run property and oracle checks on an MDP")
    p.add_argument("mdp", nargs="?", help="MDP file; the configured environment if omitted")
    _add_config_flags(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverFailure, NoConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PoisonError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
