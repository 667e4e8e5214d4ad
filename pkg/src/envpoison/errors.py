"""Exception hierarchy shared by every module."""


class PoisonError(Exception):
    """Base class for all library errors."""


class SingularChain(PoisonError):
    """A Markov-chain linear system is singular (reducible or periodic chain)."""


class DomainError(PoisonError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoConvergence(PoisonError):
    """An iterative method hit its iteration cap."""


class SolverFailure(PoisonError):
    """A solver returned a result that fails post-hoc verification."""


class Infeasible(PoisonError):
    """The attack problem has no feasible solution.

    ``violations`` lists the offending ``(state, action)`` pairs when known.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PreconditionFailed(PoisonError):
    """A documented precondition of the operation does not hold."""


class DimensionMismatch(PoisonError, ValueError):
    """Two objects that must share (S, A) do not."""
