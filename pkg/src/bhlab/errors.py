"""Exception types shared across the package."""


class BhlabError(Exception):
    """Base class for all errors raised by this package."""


class ArithmeticOverflowError(BhlabError, OverflowError):
    """An exact integer computation would exceed the configured width."""


class BudgetExceededError(BhlabError):
    """An exhaustive enumeration would exceed the configured point budget."""


class SingularMatrixError(BhlabError, ValueError):
    pass


class InvalidRegionError(BhlabError, ValueError):
    pass


class DegeneratePatchError(BhlabError):
    """A direction patch received no samples, so no estimate is possible."""


class UnsupportedCaseError(BhlabError, NotImplementedError):
    pass


class PrecisionError(BhlabError):
    pass


class ConfigError(BhlabError, ValueError):
    pass


class InvariantError(BhlabError, AssertionError):
    """A checked mathematical invariant failed during a run."""
