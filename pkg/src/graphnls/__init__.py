"""Nonlinear Schrodinger dynamics near the half-soliton on a star graph."""

from .errors import (ConvergenceError, DecompositionError, DomainError, EscapeTimeout, GraphNLSError,
                     GridMismatchError, InconsistencyError, SolverError, StepFailure)
from .grid import GraphField, StarGraphGrid, distance_to_orbit, h1_norm, l2_inner
from .stationary import ClosedFormFamily, DiscreteFamily, half_soliton

__version__ = "0.1.0"

__all__ = [
    "ClosedFormFamily", "ConvergenceError", "DecompositionError", "DiscreteFamily", "DomainError",
    "EscapeTimeout", "GraphField", "GraphNLSError", "GridMismatchError", "InconsistencyError",
    "SolverError", "StarGraphGrid", "StepFailure", "distance_to_orbit", "h1_norm", "half_soliton",
    "l2_inner", "__version__",
]
