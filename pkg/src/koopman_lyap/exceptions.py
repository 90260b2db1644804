"""Exception hierarchy shared by the estimators and the CLI."""


class KoopmanLyapError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(KoopmanLyapError, ValueError):
    """Invalid argument value, shape or combination."""


class IllConditionedError(KoopmanLyapError, ArithmeticError):
    """A Gram system is singular or numerically rank deficient."""


class InstabilityError(KoopmanLyapError, ArithmeticError):
    """Spectral radius outside the unit disk where a stable operator is required."""


class IntegrationDivergenceError(KoopmanLyapError, ArithmeticError):
    """The integrator produced a non-finite state."""


class DivergenceWarning(UserWarning):
    """A predicted trajectory left the admissible region and was truncated."""


class ConvergenceWarning(UserWarning):
    """An iterative oracle stopped at its iteration cap."""


class ConfigError(KoopmanLyapError, ValueError):
    """Malformed or inconsistent experiment configuration."""
