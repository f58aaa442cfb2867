"""Exception hierarchy shared by all lccmkit modules."""


class LCCMError(Exception):
    """Base class for all errors raised by lccmkit."""


class SchemaError(LCCMError, ValueError):
    """An attribute schema is malformed or a level is not declared."""


class SpecError(LCCMError, ValueError):
    """A model specification is malformed or not identifiable."""


class DataError(LCCMError, ValueError):
    """A dataset or observation violates its declared structure."""


class ConfigError(LCCMError, ValueError):
    """A design or simulation configuration cannot be satisfied."""


class NumericError(LCCMError, ArithmeticError):
    """A numerical kernel received or produced non-finite values."""


class EstimationError(LCCMError, RuntimeError):
    """Estimation failed; ``best`` carries the best result found so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
