"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (``"support-mismatch"``,
``"zero-variance"``, ...) so callers and the CLI can branch on it without
parsing messages.
"""


class WassarError(Exception):
    """Base class for all library errors."""

    exit_code = 4

    def __init__(self, code, message=None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class DataError(WassarError, ValueError):
    """Input data is malformed or incompatible (grids, lengths, supports)."""

    exit_code = 3


class NumericalError(WassarError, ArithmeticError):
    """A computation cannot proceed (singular systems, zero variance, ...)."""

    exit_code = 4
