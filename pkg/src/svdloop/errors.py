"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are inconsistent, or a matrix is not square where required."""


class DomainError(ValueError):
    """Input values violate an operation's domain (non-finite, wrong structure, bad range)."""


class ParseError(ValueError):
    """A configuration document is malformed; the message names the offending location."""


class NearDegenerateError(RuntimeError):
    """Singular values are too close together, or too close to zero, for a gauge step."""

    def __init__(self, message: str, index_pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.index_pair = index_pair


class StepTooLargeError(RuntimeError):
    """Column matching between consecutive frames fell below the correlation floor."""


class ContinuationFailedError(RuntimeError):
    """Loop continuation aborted after step-size underflow; carries the last good parameter."""

    def __init__(self, message: str, last_t: float = 0.0, reason: str = ""):
        super().__init__(message)
        self.last_t = last_t
        self.reason = reason


class RefinementNeededError(RuntimeError):
    """A per-step phase increment was too large to resolve the winding branch."""
