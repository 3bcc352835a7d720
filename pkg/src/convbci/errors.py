"""Exception types raised across the pipeline.

Every error derives from :class:`PipelineError`. Errors caused by bad input
values also derive from :class:`ValueError` so callers can catch them the
usual way.
"""


class PipelineError(Exception):
    """Base class for all pipeline errors."""


class InputError(PipelineError, ValueError):
    """Invalid input data or arguments."""


# session I/O
class MissingFile(PipelineError, FileNotFoundError):
    pass


class MalformedHeader(InputError):
    pass


class SampleCountMismatch(InputError):
    pass


class NonFiniteSample(InputError):
    pass


class IoFailure(PipelineError, OSError):
    pass


class MalformedRecord(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OverlappingRounds(InputError):
    pass


class NonMonotonicTimestamps(InputError):
    pass


# dsp
class UpsampleRequested(InputError):
    pass


class RatioNotRational(InputError):
    pass


class SingleChannel(InputError):
    pass


class CutoffAboveNyquist(InputError):
    pass


class UnstableFilter(PipelineError):
    pass


class WindowOutOfBounds(InputError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TooShort(InputError):
    pass


class InvalidFraction(InputError):
    pass


# features / classifier
class SingleClass(InputError):
    pass


class DegenerateEpoch(InputError):
    pass


class NotPositiveDefinite(InputError):
    pass


class TooManyFilters(InputError):
    pass


class NonFiniteFeature(PipelineError):
    pass


class EpochTooShort(InputError):
    pass


class MalformedAngle(InputError):
    pass


class TooFewObservations(InputError):
    pass


class SingularCovariance(PipelineError):
    pass


class DimensionMismatch(InputError):
    pass


class MalformedModel(InputError):
    pass


class KindMismatch(InputError):
    pass


# eval
class EmptyCounts(InputError):
    pass


class ClassTooSmall(InputError):
    pass


# online
class ChannelMismatch(InputError):
    pass


class SessionTooShort(InputError):
    pass


class EmptyTrace(InputError):
    pass


# alignment / statistics
class EmptyPairs(InputError):
    pass


class DriftOutOfRange(InputError):
    pass


class EmptyRound(InputError):
    pass


class TooFewRounds(InputError):
    pass


class ZeroVarianceX(InputError):
    pass


# synth
class InvalidConfig(InputError):
    pass


class DegenerateModel(PipelineError):
    """Training produced an unusable model (e.g. identical class means)."""
