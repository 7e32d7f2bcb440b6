"""Exception hierarchy for temperlevy."""


class TemperLevyError(Exception):
    """Base class for all library errors."""


class DivergentEta(TemperLevyError):
    """The removed-jump measure has infinite mass (condition B2 fails)."""


class DivergentSigma(TemperLevyError):
    """The |x|^alpha moment of a Rosinski measure diverges."""


class QuadratureFailure(TemperLevyError):
    """An adaptive quadrature could not meet its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedAlpha(TemperLevyError):
    """Requested stability index / skewness combination is not implemented."""


class IntegrabilityUnverified(TemperLevyError):
    """|phi|^t could not be shown to be integrable, so no density is available."""


class BracketFailure(TemperLevyError):
    """Root search could not enclose the requested probability level."""


class RatioAboveOne(TemperLevyError):
    """Acceptance ratio exceeded 1 beyond tolerance (density or eta bug)."""

    def __init__(self, message, x=None, ratio=None):
        super().__init__(message)
        self.x = x
        self.ratio = ratio


class EmptySample(TemperLevyError, ValueError):
    """A statistic was requested on an empty sample."""
