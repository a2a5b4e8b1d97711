"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """A record or domain object violates one of its invariants."""


class ParseError(ValidationError):
    """A log stream contains a malformed record.

    Carries the 1-based line number and, when identifiable, the offending
    field name.
    """

    def __init__(self, line: int, message: str, field: str | None = None):
        self.line = line
        self.field = field
        prefix = f"line {line}"
        if field:
            prefix += f", field '{field}'"
        super().__init__(f"{prefix}: {message}")


class InvalidWindowError(ValueError):
    """A time window with t1 >= t2 was requested."""


class CapacityError(ValueError):
    """The channel cannot carry the requested payload."""


class EncodeError(ValueError):
    """A bit stream cannot be encoded with the given codebook."""


class DecodeError(ValueError):
    """A slot sequence cannot be decoded with the given codebook."""


class InsufficientDataError(ValueError):
    """A series is too short for the requested computation."""
