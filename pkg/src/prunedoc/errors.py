"""Exception hierarchy shared across the toolkit."""


class PrunedocError(Exception):
    """Base class for all toolkit errors."""


class MalformedInputError(PrunedocError):
    """Raw input bytes/dimensions do not describe a valid image."""


class ShapeError(PrunedocError):
    """Array or buffer has the wrong length/shape for the operation."""


class ConfigurationError(PrunedocError):
    """Parameters are inconsistent (patch-size mismatch, even kernel, ...)."""


class DegenerateDataError(PrunedocError):
    """Dataset or mask is degenerate for the requested operation."""


class UndefinedMetricError(PrunedocError):
    """Metric is undefined for the given inputs (e.g. AP with no positives)."""


class StateError(PrunedocError):
    """Operation applied to a value in the wrong state (e.g. double reindex)."""


class ParseError(PrunedocError):
    """Base for serialization-format failures."""


class FormatVersionError(ParseError):
    """Magic bytes or version field do not match the expected format."""


class TruncatedPayloadError(ParseError):
    """Payload ends before all declared content was read."""


class InvariantViolationError(ParseError):
    """Payload parsed but violates a structural invariant."""
