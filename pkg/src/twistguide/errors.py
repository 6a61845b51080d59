"""Exception types raised across the package."""


class TwistGuideError(Exception):
    """Base class for all package errors."""


class DegenerateDiscretizationError(TwistGuideError):
    """Grid too coarse: the cross-section contains no interior node."""


class DegenerateGroundStateError(TwistGuideError):
    """The lowest transverse eigenvalue is (numerically) not simple."""


class EigensolverError(TwistGuideError):
    """An eigensolver failed to converge.

    ``residuals`` carries whatever residual information was available at failure.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class InvalidProfileError(TwistGuideError):
    """Curvature profile violates the positivity / support requirements."""


class IntegratorStepError(TwistGuideError):
    """Frame orthonormality drifted beyond tolerance; use a smaller step."""


class ImmersionError(TwistGuideError):
    """The tube map fails to be an immersion (h <= 0 or a*|kappa1| >= 1)."""


class ConfigurationError(TwistGuideError):
    """Inconsistent numerical set-up (truncation, supports, parameters)."""


class HardyUnavailableError(TwistGuideError):
    """Hardy constants undefined: lambda vanishes or sigma is identically zero."""
