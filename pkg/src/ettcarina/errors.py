"""Exception types shared across the package."""


class EttCarinaError(Exception):
    """Base class for all library errors."""


class EmptyMaskError(EttCarinaError):
    """Raised when an operation requires at least one foreground pixel."""


class MissingObjectError(EttCarinaError):
    """Raised when an annotation lacks the requested object's points."""


class DegenerateAnnotationError(EttCarinaError):
    """Raised when annotated points span zero area (all collinear)."""


class UndefinedMetricError(EttCarinaError):
    """Raised when a metric has no defined value (e.g. zero denominator)."""


class TooFewPairsError(EttCarinaError):
    """Raised when correlation statistics are requested for fewer than 4 pairs."""


class InvalidSpecError(EttCarinaError):
    """Raised when a fixture spec violates its geometric invariants."""


class InputFormatError(EttCarinaError):
    """Parse failure in an input file; carries enough context to locate it."""

    def __init__(self, message, path=None, record=None, field=None):
        self.path = path
        self.record = record
        self.field = field
        parts = []
        if path is not None:
            parts.append(f"file {path}")
        if record is not None:
            parts.append(f"record {record}")
        if field is not None:
            parts.append(f"field {field!r}")
        where = ", ".join(parts)
        super().__init__(f"{message} ({where})" if where else message)
