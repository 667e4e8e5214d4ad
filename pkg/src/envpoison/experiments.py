"""Parameter sweeps, CSV output and run-time reporting.

Configs are flat ``key = value`` files (``#`` starts a comment).  Sweep
keys (``r_s0``, ``eps``) accept a single number, a comma list, or an
inclusive range ``start:stop:step``.  See the README for every key.
"""
import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .attacks.dynamics import (attack_dynamics_general, attack_dynamics_nontarget)
from .attacks.reward import attack_reward_general, attack_reward_nontarget
from .chain import bias_and_q, optimal_policy
from .envs import GRID_ADJACENCY, GRID_TARGET, build_chain_env, build_grid_env, chain_target, grid_target
from .errors import DomainError, Infeasible, NoConvergence, PoisonError, SolverFailure
from .learners import Ucrl2, UniformRandomLearner
from .lp import parse_p
from .mdp import DetPolicy, Mdp
from .online import (Attack, attack_scale, bound_values, cost_curve, miss_curve, run_online,
                     sampling_tables, summary_rows)

ATTACKS = ("rattack", "nt-rattack", "dattack", "nt-dattack", "none")
FLOAT_FMT = ".12g"


def parse_range(text):
    """``"a:b:step"`` (inclusive), ``"x,y,z"`` or a single number -> tuple of floats."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3:
            raise DomainError(f"range {text!r} must be start:stop:step")
        start, stop, step = parts
        if step <= 0 or stop < start:
            raise DomainError(f"range {text!r} is empty")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round away accumulated drift so grid points print cleanly
        return tuple(float(round(start + i * step, 12)) for i in range(n))
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise DomainError("empty sweep range")
    return vals


def _parse_table(text, rows):
    out = tuple(tuple(int(v) for v in row.split(",")) for row in text.split(";"))
    if len(out) != rows:
        raise DomainError(f"table {text!r} needs {rows} ';'-separated rows")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str = "chain4"
    r_s0: tuple = (-2.5,)
    eps: tuple = (0.1,)
    delta: float = 1e-4
    p: float = None
    attack_p: float = None
    attack: tuple = ("nt-rattack",)
    setting: str = "offline"
    horizon: int = 200_000
    seeds: int = 20
    seed: int = 0
    repetitions: int = 10
    pool_size: int = 32
    confidence: float = 0.05
    reward_range: float = None
    evi_tol_scale: float = 1.0
    evi_tau: float = 0.01
    learner: str = "ucrl2"
    initial_state: int = 0
    cadence: int = 1000
    chain_states: int = 4
    chain_order: tuple = None
    grid_adjacency: tuple = GRID_ADJACENCY
    target: tuple = None
    workers: int = 1
    output: str = "results.csv"

    def __post_init__(self):
        if self.setting not in ("offline", "online"):
            raise DomainError("setting must be offline or online")
        for a in self.attack:
            if a not in ATTACKS:
                raise DomainError(f"unknown attack {a!r}; choose from {ATTACKS}")
        if not self.r_s0 or not self.eps:
            raise DomainError("sweep ranges must be nonempty")
        if self.setting == "online" and self.horizon < 1:
            raise DomainError("horizon must be at least 1")
        if self.seeds < 1 or self.repetitions < 1 or self.pool_size < 1:
            raise DomainError("seeds, repetitions and pool_size must be positive")

    @property
    def norm(self):
        """Cost norm: the ``p`` key, else l_inf offline and l_1 online."""
        if self.p is not None:
            return self.p
        return np.inf if self.setting == "offline" else 1

    @property
    def solve_p(self):
        """Norm used to solve the offline attack problems."""
        return self.norm if self.attack_p is None else self.attack_p

    # -- parsing -------------------------------------------------------

    @classmethod
    def from_mapping(cls, items, base=None):
        kw = {}
        for key, raw in items.items():
            key = key.strip().replace("-", "_")
            kw[key] = _convert(key, str(raw).strip())
        base = base or cls()
        names = {f.name for f in fields(cls)}
        unknown = set(kw) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return replace(base, **kw)

    @classmethod
    def from_text(cls, text, base=None):
        return cls.from_mapping(parse_key_values(text), base)

    @classmethod
    def load(cls, path, base=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), base)

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_render(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def parse_key_values(text):
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _convert(key, v):
    if key in ("r_s0", "eps"):
        return parse_range(v)
    if key == "attack":
        return tuple(a.strip().lower() for a in v.split(",") if a.strip())
    if key in ("p", "attack_p"):
        return None if v.lower() in ("", "none", "auto") else parse_p(v)
    if key == "reward_range":
        return None if v.lower() in ("", "none", "auto") else float(v)
    if key in ("delta", "confidence", "evi_tol_scale", "evi_tau"):
        return float(v)
    if key in ("horizon", "seeds", "seed", "repetitions", "pool_size", "initial_state",
               "cadence", "chain_states", "workers"):
        return int(float(v))
    if key == "grid_adjacency":
        return _parse_table(v, 2)
    if key in ("chain_order", "target"):
        return None if v.lower() in ("", "none", "auto", "default") else \
            tuple(int(x) for x in v.split(","))
    return v


def _render(v):
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ";".join(",".join(str(x) for x in row) for row in v)
        return ",".join(_render(x) for x in v)
    if isinstance(v, float):
        return "inf" if v == np.inf else format(v, ".12g")
    return str(v)


# ----------------------------------------------------------------------------
# environments and attacks


def build_env(cfg, r_s0):
    """``(mdp, target)`` for the configured environment at ``R(s0) = r_s0``."""
    name = cfg.environment
    if name in ("chain4", "chain"):
        n = cfg.chain_states if name == "chain" else 4
        mdp = build_chain_env(r_s0, n, cfg.chain_order)
        target = chain_target(n)
    elif name.startswith("chain") and name[5:].isdigit():
        n = int(name[5:])
        mdp = build_chain_env(r_s0, n, cfg.chain_order)
        target = chain_target(n)
    elif name == "grid9":
        mdp = build_grid_env(r_s0, cfg.grid_adjacency)
        target = grid_target(GRID_TARGET)
    elif name.startswith("file:"):
        mdp = Mdp.load(name[5:])
        target = DetPolicy.constant(mdp.n_states, 0)
    else:
        raise DomainError(f"unknown environment {name!r}")
    if cfg.target is not None:
        target = DetPolicy(np.asarray(cfg.target)).validate(mdp)
    return mdp, target


def run_attack(name, mdp, target, eps, cfg, seed=0, p=None):
    """Run one offline attack; dynamics results may be infeasible (never raised)."""
    p = cfg.solve_p if p is None else p
    if name == "rattack":
        return attack_reward_general(mdp, target, eps, p)
    if name == "nt-rattack":
        return attack_reward_nontarget(mdp, target, eps, p)
    if name == "nt-dattack":
        return attack_dynamics_nontarget(mdp, target, eps, cfg.delta, p)
    if name == "dattack":
        return attack_dynamics_general(mdp, target, eps, cfg.delta, p, cfg.pool_size, seed)
    if name == "none":
        return None
    raise DomainError(f"unknown attack {name!r}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, FLOAT_FMT)
    return str(v)


def _write_csv(path_or_fh, header, rows):
    if hasattr(path_or_fh, "write"):
        fh, close = path_or_fh, False
    else:
        fh, close = open(path_or_fh, "w", encoding="utf-8", newline=""), True
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if close:
            fh.close()


def _sidecar(path, suffix):
    if path.endswith(".csv"):
        return path[:-4] + suffix
    return path + suffix


def _parallel_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# ----------------------------------------------------------------------------
# offline sweep

OFFLINE_COLUMNS = ("environment", "attack", "r_s0", "eps", "delta", "p", "feasible", "cost",
                   "lower_bound", "upper_bound", "runs", "status")


def _offline_point(job):
    cfg, name, r_s0, eps = job
    mdp, target = build_env(cfg, r_s0)
    reps = cfg.repetitions if name == "dattack" else 1
    costs, lows, ups = [], [], []
    feasible = True
    status = "ok"
    t0 = time.perf_counter()
    for rep in range(reps):
        try:
            res = run_attack(name, mdp, target, eps, cfg, seed=cfg.seed + rep)
        except Infeasible as exc:
            feasible, status = False, "infeasible"
            if exc.violations:
                status += " " + " ".join(f"({s};{a})" for s, a in exc.violations)
            continue
        except PoisonError as exc:
            feasible, status = False, f"error {type(exc).__name__}: {exc}".replace(",", ";")
            break
        if res is None:
            costs.append(0.0)
            lows.append(0.0)
            ups.append(0.0)
            continue
        lows.append(res.lower_bound)
        ups.append(res.upper_bound)
        if not res.feasible:
            feasible = False
            status = "infeasible " + " ".join(f"({s};{a})" for s, a in res.violations)
            continue
        costs.append(res.cost)
    elapsed = time.perf_counter() - t0
    cost = float(np.mean(costs)) if costs and feasible else math.inf
    row = (cfg.environment, name, r_s0, eps, cfg.delta, _render(cfg.solve_p), feasible, cost,
           float(np.mean(lows)) if lows else math.nan,
           float(np.mean(ups)) if ups else math.nan, len(costs), status)
    return row, elapsed


def offline_rows(cfg):
    """Rows of the offline sweep, sorted by (attack, r_s0, eps), plus timings."""
    jobs = [(cfg, a, r, e) for a in cfg.attack for r in cfg.r_s0 for e in cfg.eps]
    out = _parallel_map(_offline_point, jobs, cfg.workers)
    order = sorted(range(len(jobs)), key=lambda i: (cfg.attack.index(jobs[i][1]),
                                                     jobs[i][2], jobs[i][3]))
    rows = [out[i][0] for i in order]
    timings = [(jobs[i][1], jobs[i][2], jobs[i][3], out[i][1]) for i in order]
    return rows, timings


def run_offline_sweep(cfg, path=None):
    """Write the offline sweep CSV (and a ``.timing.csv`` sidecar); return the rows.

    Wall-clock times go to the sidecar so the main CSV is byte-identical
    across runs.
    """
    rows, timings = offline_rows(cfg)
    path = path or cfg.output
    _write_csv(path, OFFLINE_COLUMNS, rows)
    _write_csv(_sidecar(path, ".timing.csv"), ("attack", "r_s0", "eps", "seconds"), timings)
    return rows


# ----------------------------------------------------------------------------
# online sweep

CURVE_COLUMNS = ("attack", "t", "avg_miss", "avg_cost", "avg_regret", "miss_bound",
                 "cost_bound", "seeds")
TRACE_COLUMNS = ("attack", "seed") + ("t", "state", "action", "reward", "mismatch",
                                      "manipulation", "cumulative_miss",
                                      "cumulative_cost_l1")


def default_reward_range(rewards):
    """Unit radius scale, raised to the largest reported reward when that exceeds 1."""
    return max(1.0, float(np.max(rewards)))


def online_attack(name, mdp, target, eps, cfg, seed):
    res = run_attack(name, mdp, target, eps, cfg, seed=seed)
    if res is None:
        return Attack.none()
    if hasattr(res, "r_hat"):
        return Attack.reward(res.mdp_hat)
    if not res.feasible:
        raise Infeasible(f"{name} infeasible at eps={eps}", res.violations)
    return Attack.dynamics(res.mdp_hat)


def make_learner(cfg, mdp, reward_range, seed):
    if cfg.learner == "ucrl2":
        return Ucrl2(mdp.n_states, mdp.n_actions, confidence=cfg.confidence,
                     reward_range=reward_range, tau=cfg.evi_tau,
                     evi_tol_scale=cfg.evi_tol_scale)
    if cfg.learner == "uniform":
        return UniformRandomLearner(mdp.n_states, mdp.n_actions, seed)
    raise DomainError(f"unknown learner {cfg.learner!r}")


def checkpoints(horizon, cadence):
    ts = list(range(cadence, horizon + 1, cadence))
    if not ts or ts[-1] != horizon:
        ts.append(horizon)
    return np.array(ts, dtype=np.int64)


def _online_run(job):
    cfg, name, seed, r_s0, eps = job
    mdp, target = build_env(cfg, r_s0)
    attack = online_attack(name, mdp, target, eps, cfg, seed)
    rr = cfg.reward_range if cfg.reward_range is not None else \
        default_reward_range(sampling_tables(mdp, attack)[1])
    learner = make_learner(cfg, mdp, rr, seed)
    trace = run_online(mdp, attack, target, learner, cfg.horizon, seed, cfg.initial_state)
    ts = checkpoints(cfg.horizon, cfg.cadence)
    m_hat = attack.mdp_hat if attack.mdp_hat is not None else mdp
    rho = bias_and_q(m_hat, optimal_policy(m_hat)).gain
    cum_r = np.concatenate([[0.0], np.cumsum(trace.rewards)])
    regret = rho * ts - cum_r[ts]
    return {
        "miss": miss_curve(trace, ts), "cost": cost_curve(trace, ts, cfg.norm),
        "regret": regret, "summary": summary_rows(trace, cfg.cadence),
        "episodes": trace.info.get("episodes"),
    }


def online_results(cfg, r_s0=None, eps=None):
    """Per-attack seed-mean curves with bound curves; deterministic in the config."""
    r_s0 = cfg.r_s0[0] if r_s0 is None else r_s0
    eps = cfg.eps[0] if eps is None else eps
    jobs = [(cfg, a, cfg.seed + k, r_s0, eps) for a in cfg.attack for k in range(cfg.seeds)]
    runs = _parallel_map(_online_run, jobs, cfg.workers)
    mdp, target = build_env(cfg, r_s0)
    ts = checkpoints(cfg.horizon, cfg.cadence)
    out = {}
    for name in cfg.attack:
        mine = [(j[2], r) for j, r in zip(jobs, runs) if j[1] == name]
        mine.sort(key=lambda x: x[0])
        miss = np.mean([r["miss"] for _, r in mine], axis=0)
        cost = np.mean([r["cost"] for _, r in mine], axis=0)
        regret = np.mean([r["regret"] for _, r in mine], axis=0)
        if name == "none" or eps <= 0:
            mb = cb = np.zeros_like(miss)
        else:
            attack = online_attack(name, mdp, target, eps, cfg, cfg.seed)
            mode = attack.mode
            scale = attack_scale(mdp, target, eps, mode, cfg.delta)
            pairs = [bound_values(g, int(t), attack.mdp_hat, target, eps, cfg.norm, scale)
                     for g, t in zip(regret, ts)]
            mb = np.array([b[0] for b in pairs])
            cb = np.array([b[1] for b in pairs])
        out[name] = {"t": ts, "miss": miss, "cost": cost, "regret": regret,
                     "miss_bound": mb, "cost_bound": cb, "runs": mine}
    return out


def run_online_sweep(cfg, path=None):
    """Write seed-mean curves to ``path`` and per-seed summaries to ``.traces.csv``."""
    res = online_results(cfg)
    path = path or cfg.output
    rows = []
    trace_rows = []
    for name in cfg.attack:
        r = res[name]
        for i, t in enumerate(r["t"]):
            rows.append((name, int(t), r["miss"][i], r["cost"][i], r["regret"][i] / t,
                         r["miss_bound"][i], r["cost_bound"][i], len(r["runs"])))
        for seed, run in r["runs"]:
            for srow in run["summary"]:
                trace_rows.append((name, seed) + tuple(srow))
    _write_csv(path, CURVE_COLUMNS, rows)
    _write_csv(_sidecar(path, ".traces.csv"), TRACE_COLUMNS, trace_rows)
    return res


# ----------------------------------------------------------------------------
# run times

PROBLEMS = (("reward", "rattack"), ("dynamics", "dattack"), ("reward-nt", "nt-rattack"),
            ("dynamics-nt", "nt-dattack"))


def report_runtimes(cfg, large_states=100, include_large=True):
    """Wall-clock seconds of each attack problem on the configured env and a long chain.

    Returns ``(rows, text_table)``; each row is ``(env, problem, attack, seconds, status)``.
    """
    r_s0 = cfg.r_s0[0]
    eps = cfg.eps[0]
    envs = [(cfg.environment, cfg)]
    if include_large:
        envs.append((f"chain{large_states}",
                     replace(cfg, environment=f"chain{large_states}", target=None,
                             chain_order=None)))
    rows = []
    for label, c in envs:
        mdp, target = build_env(c, r_s0)
        for prob, name in PROBLEMS:
            t0 = time.perf_counter()
            try:
                res = run_attack(name, mdp, target, eps, c, seed=c.seed)
                status = "ok" if getattr(res, "feasible", True) else "infeasible"
            except Infeasible:
                status = "infeasible"
            except (SolverFailure, NoConvergence) as exc:
                status = f"solver failure: {exc}"
            rows.append((label, prob, name, time.perf_counter() - t0, status))
    buf = io.StringIO()
    buf.write(f"{'env':<10} {'problem':<12} {'attack':<11} {'seconds':>10}  status\n")
    for label, prob, name, sec, status in rows:
        buf.write(f"{label:<10} {prob:<12} {name:<11} {sec:>10.4f}  {status}\n")
    return rows, buf.getvalue()
