"""Exception hierarchy shared across the engine.

Every error carries a stable class name so the CLI and the HTTP service can
report a machine-readable error class without string matching on messages.
"""


class FactweaveError(Exception):
    """Base class for all engine errors."""

    exit_code = 1  # internal error unless a subclass says otherwise


class InputError(FactweaveError):
    """Bad user input: malformed files, invalid facts, unknown fields."""

    exit_code = 2


class CapacityError(FactweaveError):
    """A bounded operation would exceed its configured hard limit."""

    exit_code = 3

    def __init__(self, message: str, estimate: int | None = None):
        super().__init__(message)
        self.estimate = estimate


class ValidationError(InputError):
    """A fact violates a structural or data-dependent rule."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ParseError(InputError):
    """Malformed fact-spec or story document; carries a position hint."""

    def __init__(self, message: str, position: str | int | None = None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class SchemaError(InputError):
    """A referenced field does not exist or has the wrong kind."""


class DomainError(InputError):
    """A filter value lies outside the field's observed domain."""


class MeasureTypeError(InputError):
    """Numeric aggregation requested over a non-numerical field."""


class EmptyDatasetError(InputError):
    """CSV content had no data rows."""


class FormatError(InputError):
    """Structurally broken input file (ragged CSV row, bad table line)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class DimensionError(InputError):
    """Vector dimensions disagree."""


class DegenerateVectorError(InputError):
    """Zero vector where a direction is required (cosine)."""


class DegenerateKeyframesError(InputError):
    """Interpolation endpoints coincide in fact space or vector space."""


class DegenerateDirectionError(InputError):
    """Path reward needs distinct segment endpoints."""


class TrainingDivergedError(FactweaveError):
    """Refinement training increased the loss for too many epochs."""


class ConfigError(InputError):
    """Engine configuration file failed to parse or validate."""
