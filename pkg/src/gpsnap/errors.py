"""Exception types shared across the package."""


class GpSnapError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(GpSnapError, ValueError):
    pass


class OutOfRangeError(GpSnapError, ValueError):
    pass


class InvalidInputError(GpSnapError, ValueError):
    pass


class DesignError(GpSnapError):
    """Controller design could not meet its targets."""


class InstabilityError(GpSnapError):
    pass


class RankDeficiencyError(GpSnapError, ValueError):
    pass


class DivergenceError(GpSnapError):
    def __init__(self, message, trial=None):
        super().__init__(message)
        self.trial = trial


class IllConditionedKernelError(GpSnapError):
    pass


class FitFailureError(GpSnapError):
    pass
