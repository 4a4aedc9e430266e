"""Exception taxonomy shared by all advcraft modules."""


class AdvcraftError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AdvcraftError):
    """Invalid parameter or incompatible shapes supplied by the caller."""


class NumericError(AdvcraftError):
    """A computation produced NaN/Inf; carries enough context to locate it."""

    def __init__(self, message, layer=None, epoch=None, batch=None):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch
        self.batch = batch


class ParseError(AdvcraftError):
    """Malformed input file; ``offset`` is the byte position when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class IntegrityError(AdvcraftError):
    """File parsed but its contents contradict its own header."""


class UnsupportedVersionError(AdvcraftError):
    """File declares a format version this build does not read."""


class StalledAttackError(AdvcraftError):
    """Attack cannot make progress; carries the trace up to the stall."""

    def __init__(self, message, trace=None, iterations=0):
        super().__init__(message)
        self.trace = trace if trace is not None else []
        self.iterations = iterations


class UndefinedMetricError(AdvcraftError):
    """Robustness denominator is zero; the metric must be reported as N/A."""
