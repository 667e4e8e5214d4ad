"""Optimal reward and transition-dynamics poisoning of average-reward RL agents."""
from .attacks.dynamics import (attack_dynamics_constructive, attack_dynamics_general,
                               attack_dynamics_nontarget, dynamics_bounds, feasibility_table,
                               sufficient_condition)
from .attacks.reward import attack_reward_general, attack_reward_nontarget, reward_bounds
from .chain import (bias_and_q, brute_force_gains, diameter, gain, hajnal_alpha,
                    hitting_times, is_eps_robust_optimal, neighbor_gains, optimal_policy,
                    stationary_distribution)
from .config import DEFAULT, Tolerances
from .envs import build_chain_env, build_grid_env, chain_target, grid_target
from .errors import (DimensionMismatch, DomainError, Infeasible, NoConvergence, PoisonError,
                     PreconditionFailed, SingularChain, SolverFailure)
from .experiments import ExperimentConfig, run_offline_sweep, run_online_sweep
from .kernels import BACKEND_NAME
from .learners import FixedPolicyLearner, Ucrl2, UniformRandomLearner
from .lp import LinearProgram, min_lp_norm_to_point, solve_lp
from .mdp import DetPolicy, Mdp, check_ergodic
from .online import Attack, avg_cost, avg_miss, run_online, theoretical_bounds
from .scores import chi_table, dyn_score_tables

__version__ = "0.1.0"
