"""Exception types raised across the package."""


class ExceedanceError(Exception):
    """Base class for all package errors."""


class DomainError(ExceedanceError, ValueError):
    """An argument lies outside the domain of the operation."""


class DataError(ExceedanceError, ValueError):
    """Input data is malformed (non-finite values, wrong shape, unparsable rows)."""


class ParameterError(ExceedanceError, ValueError):
    """A model parameter violates its constraints."""


class CensoredTransitError(ExceedanceError):
    """The region is not visited on one side of the reference time.

    ``bound`` carries the one-sided lower bound on the transit time that
    can still be read off the observed window.
    """

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


class InfiniteMomentError(ExceedanceError, ArithmeticError):
    """A moment was requested but some looped hitting time is infinite."""


class UndefinedStatisticError(ExceedanceError, ArithmeticError):
    """A ratio statistic has a zero denominator."""


class UnsupportedFormError(ExceedanceError, TypeError):
    """The requested representation cannot be produced for this input."""


class FitError(ExceedanceError, RuntimeError):
    """A calibration routine failed to converge or the data are degenerate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CovarianceError(ExceedanceError, ValueError):
    """No valid factorisation of the requested covariance sequence exists."""


class NumericError(ExceedanceError, ArithmeticError):
    """A numerical routine produced a non-finite result."""


class ConfigError(ExceedanceError, ValueError):
    """An experiment configuration is invalid."""
