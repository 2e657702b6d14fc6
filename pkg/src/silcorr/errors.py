"""Exception taxonomy shared across the toolchain."""

from __future__ import annotations


class SilcorrError(Exception):
    """Base class for all errors raised by this package."""


class SpecInvariantViolation(SilcorrError):
    """A scenario description violates its class or parameter constraints."""


class UnreachableTrigger(SilcorrError):
    """The requested trigger gap is never attained given the actor speeds."""


class ParseError(SilcorrError):
    """A text document could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonMonotonicTime(SilcorrError):
    """Timestamps are not strictly increasing."""


class TooFewSamples(SilcorrError):
    """A trajectory or log does not contain enough samples."""


class SchemaMismatch(SilcorrError):
    """A log document does not match the canonical column schema."""


class EmptyLog(SilcorrError):
    """A log document contains no data rows."""


class LogInvariantViolation(SilcorrError):
    """A drive log violates a structural invariant (jitter, annotation bounds)."""


class SignalAllAbsent(SilcorrError):
    """The requested signal has no present samples in the log."""


class EventNotFound(SilcorrError):
    """The class-specific response event never occurs in the log."""


class InconsistentScenario(SilcorrError):
    """Member logs of a repetition set disagree on the scenario identity."""


class DegenerateRange(SilcorrError):
    """The synchronization anchor interval is empty (S_at <= S_min)."""


class NoCrossing(SilcorrError):
    """A repetition's distance series never crosses the sync anchor."""


class EmptyOverlap(SilcorrError):
    """The shifted time domains of the repetitions do not intersect."""


class ZeroVariance(SilcorrError):
    """A series is constant; the correlation coefficient is undefined."""


class ZeroRMS(SilcorrError):
    """The reference series is identically zero; RRMSE is undefined."""


class DegenerateSampleSize(SilcorrError):
    """Fewer than three paired samples; significance is undefined."""


class ConfigError(SilcorrError):
    """A pipeline configuration document is invalid."""


class PipelineStageError(SilcorrError):
    """Wraps an error raised inside a pipeline stage with a stage tag."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage={stage}: {cause}")
