"""Exception types raised across the toolkit."""


class ThrowSimError(Exception):
    """Base class for toolkit errors."""


class InvalidInputError(ThrowSimError, ValueError):
    """Non-finite or out-of-domain input to a numerical routine."""


class DegenerateThrowError(ThrowSimError):
    """The object never reaches the landing plane."""


class ConfigurationError(ThrowSimError):
    """An object was used before it was configured (e.g. an unfitted baseline)."""


class DivergenceError(ThrowSimError):
    """Training produced a non-finite loss or parameter."""


class InfeasibleThrowError(ThrowSimError):
    """The analytical planner found no command landing near the bin centre."""


class StudyFailedError(ThrowSimError):
    """Every trial of a hyperparameter study was pruned or diverged."""

    def __init__(self, message, trials=None):
        super().__init__(message)
        self.trials = trials or []


class PersistenceError(ThrowSimError):
    """A weight file could not be read back (bad magic, version or digest)."""
