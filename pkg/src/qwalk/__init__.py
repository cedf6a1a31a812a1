"""Continuous-time quantum-walk optimisation on diagonal problem Hamiltonians."""
from .errors import CapacityError, NumericalError, QWalkError, SpecError

__version__ = "0.1.0"

__all__ = ["CapacityError", "NumericalError", "QWalkError", "SpecError", "__version__"]
