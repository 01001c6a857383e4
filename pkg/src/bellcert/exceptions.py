"""Exception hierarchy shared across the package.

The CLI maps these classes onto distinct exit codes, so library code raises
the most specific class that applies rather than a bare ``ValueError``.
"""

from __future__ import annotations


class BellCertError(Exception):
    """Base class for every error raised deliberately by bellcert."""


class DomainError(BellCertError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(BellCertError, ArithmeticError):
    """An iterative numerical routine exhausted its iteration budget."""


class EmptyDatasetError(DomainError):
    """A statistic was requested on a dataset with no records."""


class ConfigError(BellCertError, ValueError):
    """A run configuration failed schema validation."""


class ParseError(BellCertError, ValueError):
    """A trial log could not be parsed or failed record validation.

    ``line`` is 1-based and counts the header line for CSV input.
    """

    def __init__(self, reason: str, *, line: int | None = None, column: str | None = None,
                 path: str | None = None):
        self.reason = reason
        self.line = line
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {reason}" if prefix else reason)


class MissingHeraldTimeError(DomainError):
    """Window filtering was requested on records that carry no herald time."""
