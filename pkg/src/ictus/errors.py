"""Exception types raised across the pipeline.

Every error that callers are expected to catch derives from IctusError, so
CLI-level handling can map them onto exit codes without enumerating modules.
"""


class IctusError(Exception):
    """Base class for all ictus errors."""


# --- file / wire format errors -------------------------------------------

class TruncatedFileError(IctusError):
    """Byte stream ends before the declared header or payload."""


class MalformedHeaderError(IctusError):
    """A header field is non-numeric, inconsistent, or out of range."""


class InconsistentRatesError(IctusError):
    """Signals within one data record imply different sample rates."""


class RangeOverflowError(IctusError):
    """A physical value falls outside the declared physical range."""


class MalformedLineError(IctusError):
    """An annotation line has the wrong shape or invalid values."""


class OverlappingEventsError(IctusError):
    """Seizure events overlap in time."""


class MalformedBlockError(IctusError):
    """A summary-file block is incomplete or self-contradictory."""


class BadMagicError(IctusError):
    """A binary container does not start with the expected magic bytes."""


class VersionUnsupportedError(IctusError):
    """A binary container declares a format version we cannot read."""


# --- configuration errors --------------------------------------------------

class InvalidConfigError(IctusError):
    """A config violates its invariants."""


class BadSpecError(IctusError):
    """An architecture description violates its invariants."""


class ConfigError(IctusError):
    """Unknown key or unparseable value in a run configuration."""


# --- data sufficiency errors ------------------------------------------------

class EmptySignalError(IctusError):
    """An operation received a zero-length signal."""


class EmptyInputError(IctusError):
    """An operation received an empty collection."""


class EmptySupportError(IctusError):
    """A support set has no examples on one side."""


class BadLengthError(IctusError):
    """A window does not have the required sample count."""


class TooShortError(IctusError):
    """A recording is shorter than one window."""


class TooFewError(IctusError):
    """Not enough items to sample or split."""


class TooFewSeizuresError(IctusError):
    """Per-patient harness needs at least two seizures."""


class NoQualifyingSeizureError(IctusError):
    """No seizure satisfies the collection constraints."""


class ExhaustedError(IctusError):
    """More distinct pairs requested than exist."""


# --- model / inference errors ------------------------------------------------

class ShapeMismatchError(IctusError):
    """Tensor shapes do not match the architecture."""


class WrongHeadError(IctusError):
    """Operation requires the other model head."""


class FingerprintMismatchError(IctusError):
    """Architecture fingerprints disagree."""


class DivergedError(IctusError):
    """Training produced a non-finite loss."""


class NonMonotonicTimeError(IctusError):
    """Streaming steps must be fed strictly increasing timestamps."""


class TrainingLeakageError(IctusError):
    """A replayed recording was used during training."""


class TimeBaseMismatchError(IctusError):
    """Trace and annotations do not share a time base."""


class ZeroSeizuresError(IctusError):
    """Sensitivity is undefined for zero seizures."""


class ZeroHoursError(IctusError):
    """A rate per hour is undefined over zero hours."""
