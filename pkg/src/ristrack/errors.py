"""Exception types shared across the package."""


class RistrackError(Exception):
    """Base class for all package errors."""


class ConfigError(RistrackError, ValueError):
    """Invalid configuration, dimensions, or arguments."""


class NumericError(RistrackError, RuntimeError):
    """A numerical routine failed (SVD non-convergence, singular solve, ...)."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class DivergenceError(NumericError):
    """An iterative solver diverged; carries the last stable iterate."""

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class AmbiguityError(RistrackError, ValueError):
    """A scaling ambiguity could not be resolved (zero factor column)."""
