"""Exception hierarchy.

Every error raised on purpose by the package derives from `FraclabError`.
The command line maps the three families onto exit codes:

    ParameterError      -> 2 (bad input or configuration)
    SolverError         -> 3 (a solver gave up)
    InvariantViolation  -> 4 (a computed result broke a property it must have)
"""


class FraclabError(Exception):
    """Base class for errors raised by fraclab."""


class ParameterError(FraclabError, ValueError):
    """Invalid parameter or precondition violation."""


class ConfigError(ParameterError):
    """Invalid run configuration (unknown key, bad value, unknown catalog name)."""


class SolverError(FraclabError, RuntimeError):
    """A solver failed. `last_residual` and `best` carry the last iterate's state."""
    def __init__(self, message, last_residual=None, iterations=None, best=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations
        self.best = best


class ConvergenceError(SolverError):
    """Iteration cap reached, or progress stagnated, before the tolerance was met."""


class PositivityError(SolverError):
    """Damping could not keep the iterate above the positive barrier."""


class EvolutionAborted(SolverError):
    """A time step failed. `step` is the failing index and `trace` the partial trace."""
    def __init__(self, message, step, trace, cause=None):
        last_residual = getattr(cause, 'last_residual', None)
        super().__init__(message, last_residual=last_residual, iterations=step)
        self.step = step
        self.trace = trace


class InvariantViolation(FraclabError, AssertionError):
    """A computed result violates a property it is guaranteed to have."""
    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class HypothesisWarning(UserWarning):
    """Parameters lie outside the range covered by the theory (the schemes still run)."""
