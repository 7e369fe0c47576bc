"""Exception types shared across the package."""


class MaxplusError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(MaxplusError):
    """An operand is sampled on a different grid than the operation expects."""

    def __init__(self, what, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected grid {expected}, got {got}")


class ValidationError(MaxplusError):
    """Invalid construction arguments or malformed input data."""
