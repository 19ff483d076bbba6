"""Exception types shared across the package."""


class SbpError(Exception):
    """Base class for all package errors."""


class DomainError(SbpError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(SbpError, RuntimeError):
    """A root finder or quadrature did not converge."""


class CapabilityError(SbpError, NotImplementedError):
    """The model lacks an analytic handle the operation needs."""


class SizeError(SbpError, ValueError):
    """Input too large for an enumeration-based routine."""


class ResourceError(SbpError, RuntimeError):
    """A requested tolerance could not be reached within the resource cap.

    ``achieved`` carries the best value reached before giving up.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SpecParseError(DomainError):
    """Malformed model specification string."""
