"""Centralised numerical tolerances.

Every solver and check reads from a :class:`Tolerances` record so that a
caller can tighten or relax them in one place.
"""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    stochastic: float = 1e-9   # row sums of transition kernels
    pivot: float = 1e-12       # LU pivot magnitude below which a chain is singular
    tie: float = 1e-9          # slack on every >= / = comparison against eps
    lp_feas: float = 1e-7      # max constraint violation of an Optimal LP report
    lp_phase1: float = 1e-9    # phase-1 optimum above which an LP is infeasible
    lp_pivot: float = 1e-9     # smallest usable pivot element in the simplex
    lp_max_iter: int = 100_000
    degeneracy_streak: int = 50
    dykstra_tol: float = 1e-8
    dykstra_max_iter: int = 200_000


DEFAULT = Tolerances()


def with_overrides(**kwargs):
    """Return a copy of the default tolerances with some fields replaced."""
    return replace(DEFAULT, **kwargs)
