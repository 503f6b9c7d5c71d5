"""Exception types shared across the package.

Protocol-facing errors carry a machine-readable ``code`` that is echoed
verbatim to clients in ``error`` messages.
"""


class HandpilotError(Exception):
    """Base class for all package errors."""

    code = "internal-error"


class MalformedRecord(HandpilotError):
    """A trace line is not parseable as a record at all."""

    code = "malformed-record"


class SchemaViolation(HandpilotError):
    """A record or message parses but violates its schema."""

    code = "schema-violation"


class DegenerateHand(HandpilotError):
    """Landmark geometry too collapsed to extract features from."""

    code = "degenerate-hand"


class EmptyDataset(HandpilotError):
    code = "empty-dataset"


class DimensionMismatch(HandpilotError):
    code = "dimension-mismatch"


class CorruptModel(HandpilotError):
    code = "corrupt-model"


class UnsupportedVersion(HandpilotError):
    code = "unsupported-version"


class Unreachable(HandpilotError):
    """IK failed to reach the requested pose within its iteration budget."""

    code = "unreachable"


class MalformedMessage(HandpilotError):
    code = "malformed-message"


class UnknownType(HandpilotError):
    code = "unknown-type"
