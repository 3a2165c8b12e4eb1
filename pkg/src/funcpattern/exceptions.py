"""Exception hierarchy for funcpattern.

Every error raised on purpose by the library derives from `FuncPatternError`. Errors caused by the caller's
input (files, shapes, labels, configuration) derive from `InputError`; failures of the numerical machinery
itself derive from `NumericError`. The command-line interface maps the two families to exit codes 2 and 1.
"""

from collections.abc import Mapping
from typing import Any, Optional


class FuncPatternError(Exception):
    """Base exception for funcpattern."""


class InputError(FuncPatternError):
    """Base class for errors caused by invalid input data, arguments, or configuration."""


class IngestionError(InputError):
    """
    Exception raised when a file listed for ingestion cannot be found or read.

    Attributes:
        path (str): The offending file.

    Example:
        >>> error = IngestionError("actor01_happy.csv")
        >>> error.path
        'actor01_happy.csv'
        >>> str(error)
        'Cannot read input file: actor01_happy.csv'
    """

    def __init__(self, path: str, reason: Optional[str] = None) -> None:
        """
        Initialize the exception with the file that failed.

        Args:
            path (str): The file that is missing or unreadable.
            reason (str, optional): Additional detail appended to the message.
        """
        self.path = path
        message = f"Cannot read input file: {path}"
        if reason:
            message += f" ({reason})"
        super().__init__(message)


class ParseError(InputError):
    """
    Exception raised when a cell of an input table is not a finite number.

    Rows are counted from 1 for the first data row below the header, so the numbers match what a spreadsheet
    shows minus the header line.

    Example:
        >>> error = ParseError("a.csv", 3, "AU12", "abc")
        >>> str(error)
        "Non-numeric value 'abc' in a.csv at row 3, column 'AU12'"
        >>> (error.row, error.column)
        (3, 'AU12')
    """

    def __init__(self, path: str, row: int, column: str, value: Any) -> None:
        self.path = path
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Non-numeric value {value!r} in {path} at row {row}, column {column!r}")


class BalanceError(InputError):
    """
    Exception raised when the design is not balanced.

    Every (group, variate) cell must hold the same number of samples. The counts found are kept so the caller can
    report them.

    Example:
        >>> error = BalanceError({("neutral", "AU12"): 3, ("happy", "AU12"): 2})
        >>> "neutral/AU12=3" in str(error)
        True
    """

    def __init__(self, counts: Mapping[tuple[str, str], int]) -> None:
        self.counts = dict(counts)
        listing = ", ".join(f"{group}/{variate}={count}" for (group, variate), count in self.counts.items())
        super().__init__(f"Unbalanced design, samples per (group, variate): {listing}")


class GridError(InputError):
    """Exception raised when a time grid violates its invariants."""


class DomainError(InputError):
    """Exception raised when a time value lies outside the basis domain."""


class SelectionError(InputError):
    """Exception raised when a row selection over a coefficient matrix is empty or too small."""


class ContractError(InputError):
    """Exception raised when collaborating objects disagree on shapes, labels, or sizes."""


class ConfigError(InputError):
    """Exception raised for unknown or ill-typed configuration values."""


class NumericError(FuncPatternError):
    """
    Base class for failures of the numerical machinery.

    Attributes:
        diagnostics (dict): Free-form diagnostic values describing the failure.

    Example:
        >>> error = NumericError("root solve failed", {"p": 0.5})
        >>> error.diagnostics
        {'p': 0.5}
    """

    def __init__(self, message: str, diagnostics: Optional[Mapping[str, Any]] = None) -> None:
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class ConditioningError(NumericError):
    """Exception raised when a linear system is singular or too badly conditioned to solve."""


class ConvergenceError(NumericError):
    """Exception raised when an iterative solver does not converge."""
