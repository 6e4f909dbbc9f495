"""Exception types raised by the numerical kernels."""


class LrsplitError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(LrsplitError):
    """A factor lost column rank (the low-rank state collapsed below rank r)."""


class NoConvergence(LrsplitError):
    pass


class Overflow(LrsplitError):
    pass


class KrylovStagnation(LrsplitError):
    pass


class NonFiniteEvaluation(LrsplitError):
    """The nonlinearity returned NaN or inf."""


class StepCountOverflow(LrsplitError):
    pass


class MaxStepsExceeded(LrsplitError):
    pass


class StepUnderflow(LrsplitError):
    """Adaptive step collapsed; usually the problem is too stiff for an explicit solver."""


class ParseError(LrsplitError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(LrsplitError):
    pass


class ConfigError(LrsplitError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(LrsplitError):
    pass
