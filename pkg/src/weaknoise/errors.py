"""Exception types raised across the package.

Every error derives from :class:`WeakNoiseError`, which is itself a
``ValueError`` so callers that only care about "bad input" can catch that.
"""


class WeakNoiseError(ValueError):
    """Base class for domain errors."""


# -- states and operators -------------------------------------------------

class NotHermitian(WeakNoiseError):
    pass


class TraceNotOne(WeakNoiseError):
    pass


class NotPositive(WeakNoiseError):
    pass


class NotNormalized(WeakNoiseError):
    pass


class DimMismatch(WeakNoiseError):
    pass


# -- channels -------------------------------------------------------------

class InvalidSpec(WeakNoiseError):
    pass


class GammaOutOfRange(WeakNoiseError):
    pass


class StepTooLarge(WeakNoiseError):
    pass


# -- weak values and protocols ---------------------------------------------

class OrthogonalStates(WeakNoiseError):
    """Pre- and postselected states have (numerically) zero overlap."""


class OrthogonalStatesAfterNoise(OrthogonalStates):
    """The noisy preselected state is orthogonal to the postselection."""


class GridTooCoarse(WeakNoiseError):
    pass


class ZeroPostselectProbability(WeakNoiseError):
    pass


# -- learning ---------------------------------------------------------------

class ExcludedParameter(WeakNoiseError):
    pass


class ChannelClassMismatch(WeakNoiseError):
    pass


class DegenerateFit(WeakNoiseError):
    pass


class InvalidSweep(WeakNoiseError):
    """Noise-parameter grid unsuitable for an order fit."""


# -- lindblad / haar --------------------------------------------------------

class RateOutOfRange(WeakNoiseError):
    pass


class MeanZero(WeakNoiseError):
    pass


# -- cli ----------------------------------------------------------------------

class ConfigError(WeakNoiseError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
