"""Exception hierarchy shared by all modules."""


class SoftMaximinError(Exception):
    """Base class for package errors."""


class ShapeError(SoftMaximinError, ValueError):
    """Array extents do not line up."""


class DomainError(SoftMaximinError, ValueError):
    """An input lies outside the domain of a function."""


class PreconditionError(SoftMaximinError, ValueError):
    """An argument violates a documented precondition."""


class CapabilityError(SoftMaximinError, ValueError):
    """The requested operation is not available for this input."""


class NumericalError(SoftMaximinError, ArithmeticError):
    """Non-finite values or a failed iterative method."""


class StepFailureError(NumericalError):
    """Backtracking pushed the inverse step size past its upper limit."""


class FormatError(SoftMaximinError, ValueError):
    """A binary array file could not be decoded."""


class SchemaError(SoftMaximinError, ValueError):
    """A run configuration failed validation."""
