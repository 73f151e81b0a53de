"""Exception hierarchy shared by all pipeline stages.

Every error carries an ``exit_code`` consumed by the CLI: 1 for internal
errors, 2 for precondition failures (missing inputs, empty failure sets),
3 for validation failures (malformed records, schema violations).
"""

from __future__ import annotations


class CotforgeError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class PreconditionError(CotforgeError):
    """An operation was invoked on inputs that violate its preconditions."""

    exit_code = 2


class ValidationError(CotforgeError):
    """Input content failed schema or invariant validation."""

    exit_code = 3


class MalformedRecord(ValidationError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(ValidationError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate id {record_id!r}")
        self.record_id = record_id


class IoError(CotforgeError):
    """Filesystem write/read failure wrapped with context."""


class InvalidN(PreconditionError):
    def __init__(self, n: int):
        super().__init__(f"n-gram order must be >= 1, got {n}")
        self.n = n


class MissingLength(PreconditionError):
    def __init__(self, record_id: str):
        super().__init__(f"sample {record_id!r} has no token_length")
        self.record_id = record_id


class MissingAnnotation(PreconditionError):
    def __init__(self, record_id: str):
        super().__init__(f"sample {record_id!r} has no annotations")
        self.record_id = record_id


class EmptyRollouts(PreconditionError):
    def __init__(self) -> None:
        super().__init__("rollout set has no responses")


class NoFailures(PreconditionError):
    def __init__(self) -> None:
        super().__init__("failure set is empty: failure-biased distribution undefined")


class DimMismatch(PreconditionError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"embedding dim mismatch: store has {expected}, query has {got}")
        self.expected = expected
        self.got = got


class EmptyStore(PreconditionError):
    def __init__(self) -> None:
        super().__init__("embedding store is empty")


class EmptyCandidates(PreconditionError):
    def __init__(self) -> None:
        super().__init__("no document yielded an accepted synthesis candidate")


class GeneratorError(CotforgeError):
    def __init__(self, document_id: str, reason: str):
        super().__init__(f"generator failed on document {document_id!r}: {reason}")
        self.document_id = document_id


class NonFiniteRatio(ValidationError):
    def __init__(self, response_index: int, token_index: int):
        super().__init__(f"non-finite policy ratio at response {response_index}, token {token_index}")
        self.response_index = response_index
        self.token_index = token_index


class ZeroProbability(PreconditionError):
    def __init__(self, context: int, output: int):
        super().__init__(f"model probability is zero at context {context}, output {output}")


class SupportMismatch(PreconditionError):
    """Target distribution has mass on a region the proposal never covers."""

    def __init__(self, region: list[tuple[int, int]]):
        shown = ", ".join(f"({x},{y})" for x, y in region[:8])
        more = "" if len(region) <= 8 else f" and {len(region) - 8} more"
        super().__init__(f"target has mass where proposal has none: {shown}{more}")
        self.region = region


class AmbiguousLabel(PreconditionError):
    def __init__(self, context: int):
        super().__init__(f"target conditional has tied argmax labels at context {context}")
        self.context = context


class ConfigError(ValidationError):
    """Config file violates the strict schema."""
