"""Critical points of the random plane wave: simulation, Kac-Rice densities
and count statistics."""
from .critical_points import CriticalPoint, DegenerateHessianError, Kind, classify, find_critical_points
from .field import FieldJet, FieldSample, eval_jet, sample_field
from .special_math import ConvergenceError, DomainError

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "CriticalPoint",
    "DegenerateHessianError",
    "DomainError",
    "FieldJet",
    "FieldSample",
    "Kind",
    "classify",
    "eval_jet",
    "find_critical_points",
    "sample_field",
]
