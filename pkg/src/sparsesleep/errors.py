"""Exception hierarchy shared by all modules."""


class SparseSleepError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SparseSleepError, ValueError):
    """Raised for malformed arguments (non-finite values, shape mismatches)."""


class InfeasibleError(SparseSleepError):
    """Raised when no assignment can satisfy every rate and bandwidth constraint."""


class SolverError(SparseSleepError):
    """Raised when the LP solver fails for numerical reasons or hits its iteration cap."""


class SizeLimitError(SparseSleepError):
    """Raised when an exhaustive routine is asked to handle an instance that is too large."""


class ConfigError(SparseSleepError):
    """Raised for invalid run configurations."""
