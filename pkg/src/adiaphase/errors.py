"""Exception and warning types shared across the package."""


class AdiaphaseError(Exception):
    """Base class for all package errors."""


class DomainError(AdiaphaseError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ValidationError(AdiaphaseError, ValueError):
    """Input data violates a contract (shape, symmetry, consistency)."""


class FormatError(ValidationError):
    """A structured input file does not match the documented schema."""


class PreconditionError(ValidationError):
    """A stated precondition of the operation does not hold for the inputs."""


class CapabilityError(AdiaphaseError):
    """The requested combination is not supported analytically.

    Callers receiving this should fall back to numeric differentiation.
    """


class CapacityError(AdiaphaseError):
    """The request exceeds the dense-storage limits of this implementation."""


class DegeneracyError(AdiaphaseError):
    """A required spectral gap vanished where the theory needs it nonzero."""


class NumericError(AdiaphaseError):
    """An iterative numerical procedure failed to converge."""


class UndefinedPhaseError(AdiaphaseError):
    """The boundary phase is undefined (a boundary quantity is zero).

    Callers should fall back to theta = 0 and flag the result.
    """


class InsufficientDataError(AdiaphaseError):
    """The supplied series does not contain enough structure to proceed."""


class PrecisionWarning(UserWarning):
    """A numeric result is likely less accurate than the caller requested."""
