"""Exception types raised across the package."""


class GraphNLSError(Exception):
    """Base class for all package errors."""


class DomainError(GraphNLSError, ValueError):
    """A parameter lies outside the admissible range."""


class GridMismatchError(GraphNLSError, ValueError):
    """Two fields live on different grids."""


class SolverError(GraphNLSError, RuntimeError):
    """An eigenvalue or root search failed to produce the expected result."""


class InconsistencyError(GraphNLSError, RuntimeError):
    """A computed quantity contradicts a structural identity that must hold."""


class ConvergenceError(GraphNLSError, RuntimeError):
    """An iterative solver did not converge within its iteration budget."""


class StepFailure(ConvergenceError):
    """The implicit time step did not converge; try a smaller dt."""


class DecompositionError(ConvergenceError):
    """The modulation decomposition could not be computed.

    Raised when the state has left the tubular neighbourhood of the
    stationary orbit. Callers tracking a trajectory treat this as the
    escape signal rather than as a fatal error.
    """


class EscapeTimeout(GraphNLSError, RuntimeError):
    """No escape was observed before the time cap."""
