"""Exception types shared across the package."""


class GphrfError(Exception):
    """Base class for all errors raised by this package."""


class SingularCovariance(GphrfError):
    """Measurement covariance could not be factorized, even with maximum jitter."""


class NonFinite(GphrfError):
    """An objective or gradient evaluated to a non-finite value."""


class EmptySupport(GphrfError):
    """No event-to-sample lag falls inside the response support."""


class DimensionMismatch(GphrfError):
    """Input dimensions are inconsistent."""


class DegenerateBeta(GphrfError):
    """All activation weights vanish, leaving nothing to condition on."""


class DegenerateTruth(GphrfError):
    """Reference signal has zero variance."""


class DegenerateInput(GphrfError):
    """An input vector is constant where variation is required."""


class DegenerateDesign(GphrfError):
    """A design matrix is identically zero."""


class ConfigError(GphrfError):
    """A run configuration is missing, malformed, or invalid."""


class ParseError(GphrfError):
    """A data file could not be parsed."""
