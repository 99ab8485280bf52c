"""Exception hierarchy shared across the toolkit.

Three branches map onto the CLI exit codes: configuration problems (exit 2),
data problems (exit 3), and numeric failures (exit 4).
"""


class DialectoscopeError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DialectoscopeError):
    """Bad configuration: unknown keys, missing files, invalid values."""

    exit_code = 2


class DataError(DialectoscopeError):
    """Input data cannot support the requested computation."""

    exit_code = 3


class EmptyVocabularyError(DataError):
    """No token survived the min-count intersection of both corpora."""


class UnknownTokenError(DataError):
    """A requested token is not in the vocabulary."""

    def __init__(self, token: str, suggestions: list[str] | None = None):
        self.token = token
        self.suggestions = suggestions or []
        msg = f"unknown token: {token!r}"
        if self.suggestions:
            msg += " (nearest vocabulary entries: " + ", ".join(self.suggestions) + ")"
        super().__init__(msg)


class DegenerateDirectionError(DataError):
    """A direction that should be removed or projected onto has ~zero norm."""


class ZeroOffsetError(DataError):
    """The focal word's offset between the two spaces is numerically zero."""


class InfeasibleSamplingError(DataError):
    """A sampling cell cannot supply the requested number of items."""


class UndefinedCorrelationError(DataError):
    """Rank correlation is undefined (constant input or length < 2)."""


class NumericError(DialectoscopeError):
    """A numeric routine failed to produce a usable result."""

    exit_code = 4


class DivergenceError(NumericError):
    """Training produced non-finite loss or parameters."""


class SvdFailureError(NumericError):
    """The underlying SVD did not converge."""


class RankDeficiencyError(NumericError):
    """A matrix that must be full rank is rank deficient."""
