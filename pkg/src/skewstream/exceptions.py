"""Exception hierarchy."""


class SkewStreamError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(SkewStreamError, ValueError):
    pass


class EmptyWindowError(SkewStreamError, ValueError):
    pass


class NumericalError(SkewStreamError, ArithmeticError):
    def __init__(self, message, event_index=None):
        super().__init__(message)
        self.event_index = event_index


class InvalidStateError(SkewStreamError, RuntimeError):
    pass


class ConfigError(SkewStreamError, ValueError):
    pass


class AlignmentError(SkewStreamError, ValueError):
    pass


class UndefinedMetricError(SkewStreamError, ValueError):
    pass
