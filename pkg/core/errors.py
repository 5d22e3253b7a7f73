"""
Exception hierarchy shared by every keydyn module.

All errors derive from KeydynError, itself a ValueError, so callers that only
care about "bad input" can keep catching ValueError.
"""


class KeydynError(ValueError):
    """Base class for every domain error raised by keydyn."""


# --- keystroke logs ---

class LogFormatError(KeydynError):
    """A keystroke log violates the file format or an event invariant."""


class MalformedLine(LogFormatError):
    """Bad field count or field type on a log line."""


class OrphanStroke(LogFormatError):
    """A press without its release, or a release without its press."""


class NegativeHold(LogFormatError):
    """Release recorded before the press of the same stroke."""


class NonMonotonicPress(LogFormatError):
    """A later stroke_id was pressed before an earlier one."""


class DuplicateStrokeKind(LogFormatError):
    """The same (stroke_id, kind) appears twice."""


class OutOfRange(KeydynError):
    """A stroke range falls outside the log."""


# --- features / model ---

class InsufficientData(KeydynError):
    """Not enough strokes or feature rows for the requested operation."""


class NonFiniteInput(KeydynError):
    """A feature vector contains NaN or infinity."""


class NoConvergence(KeydynError):
    """The dual solver stopped at max_iter with a KKT violation above tolerance."""


class VersionMismatch(KeydynError):
    """A file declares a format version this build does not read."""


class CorruptModel(KeydynError):
    """A model file is truncated, unparsable or fails its digest check."""


class CorruptReport(KeydynError):
    """A report file cannot be parsed back."""


# --- configuration / cohorts ---

class InvalidConfig(KeydynError):
    """A configuration value is out of its allowed range."""


class InvalidProfile(KeydynError):
    """A typist profile cannot produce well-formed logs."""


class TooFewUsers(KeydynError):
    """A cohort needs at least two users."""


class CrowdedCohort(KeydynError):
    """Too many users to keep the required parameter separation."""
