"""Error hierarchy shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config object violates its invariants."""


class ShapeError(ValueError):
    """Raised on dimension or length mismatches between arrays."""


class ContractError(ValueError):
    """Raised when a caller violates a documented precondition."""


class NumericError(RuntimeError):
    """Raised when an iterative routine produces non-finite values.

    ``step_index`` records the ascent step (or update number) at which the
    first non-finite value appeared, so a failed trial can be replayed up to
    the offending round.
    """

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class ParseError(ValueError):
    """Raised on malformed input files; carries the 1-based row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row
