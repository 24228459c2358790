"""Exception types shared across the package."""


class EpsenseError(Exception):
    """Base class for all package errors."""


class ModelError(EpsenseError, ValueError):
    """A model violates the Hermiticity/symmetry requirements or is malformed."""


class UnknownParameterError(ModelError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class StructureError(EpsenseError, ValueError):
    """A matrix lacks the block structure an operation relies on."""


class NumericRangeError(EpsenseError, ArithmeticError):
    """Entries grew beyond the representable working range."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class TruncationError(EpsenseError):
    """Fock-space cutoff too small for the requested state or evolution."""


class PrecisionFloorError(EpsenseError):
    """Finite-difference step is below the floating point resolution."""


class ClusteringError(EpsenseError):
    """Eigenvalue clusters are not separated well enough to assign EP orders."""
