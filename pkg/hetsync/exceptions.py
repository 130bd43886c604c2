""" Errors raised by hetsync. """


class HetsyncError(Exception):
    """Base class for every error raised by the package."""


class InfeasibleClusterError(HetsyncError, ValueError):
    """The cluster is too heterogeneous for the requested staleness bound."""

    def __init__(self, gap: int, staleness_bound: int, initial_barrier: int):
        self.gap = gap
        self.staleness_bound = staleness_bound
        self.initial_barrier = initial_barrier
        super().__init__(
            f'staleness gap {gap} at the initial barrier T={initial_barrier} is not below '
            f'the staleness bound M={staleness_bound}; raise M to at least {gap + 1}'
        )


class BarrierTooShortError(HetsyncError, ValueError):
    """A barrier shorter than one iteration of the slowest worker."""


class ScanBudgetError(HetsyncError, RuntimeError):
    """The barrier scan would evaluate too many candidates."""


class EventBudgetError(HetsyncError, RuntimeError):
    """A simulation produced more events than allowed."""


class DimensionMismatchError(HetsyncError, ValueError):
    """Features, labels and parameters disagree in shape."""


class NumericalError(HetsyncError, ArithmeticError):
    """An update produced NaN or inf parameters."""


class ConfigError(HetsyncError, ValueError):
    """A config file is missing, unparsable or invalid."""


class OutputDirError(HetsyncError, OSError):
    """The output directory cannot be written."""
