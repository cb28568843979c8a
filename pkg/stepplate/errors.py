"""Exception types raised by the solver modules.

The CLI maps them onto exit codes; library callers can catch the base class.
"""
from typing import Optional


class PlateSolverError(Exception):
    pass


class DomainError(PlateSolverError, ValueError):
    """Argument outside the region where a quantity is defined."""


class RangeError(PlateSolverError, OverflowError):
    """Result not representable without exponential scaling."""


class DegenerateConfigurationError(PlateSolverError):
    pass


class OracleError(PlateSolverError):
    pass


class UnsupportedRegimeError(PlateSolverError):
    """The characteristic cubic has complex roots at this frequency."""

    def __init__(self, message: str, beta: Optional[float] = None):
        super().__init__(message)
        self.beta = beta


class BranchTransitionError(PlateSolverError):
    """A characteristic root sits inside the guard band around zero."""

    def __init__(
        self,
        message: str,
        beta: Optional[float] = None,
        root: Optional[int] = None,
        segment: Optional[int] = None,
    ):
        super().__init__(message)
        self.beta = beta
        self.root = root
        self.segment = segment


class DegenerateFrequencyError(PlateSolverError):
    """A modal-coefficient denominator vanishes at this frequency."""

    def __init__(self, message: str, beta: Optional[float] = None):
        super().__init__(message)
        self.beta = beta


class ConfigFileError(PlateSolverError):
    """Plate description missing, unreadable or invalid."""
