"""CSV output strategy for tables."""

import csv
import io
from collections.abc import Sequence
from typing import Any

from .base_strategy import TableOutputStrategy, format_value


class CSVTableStrategy(TableOutputStrategy):
    """Output strategy that writes comma-separated values with a header line.

    Quoting follows the `csv` module's minimal quoting, lines end with ``\\n``.

    Example:
        >>> strategy = CSVTableStrategy()
        >>> print(strategy.format_start(["group", "variate", "mean"]), end="")
        group,variate,mean
        >>> print(strategy.format_row(["happy", "AU12", 2.75]), end="")
        happy,AU12,2.75
        >>> strategy.format_end()
        ''
    """

    def __init__(self) -> None:
        self.n_columns = 0

    def _line(self, cells: Sequence[str]) -> str:
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerow(cells)
        return buffer.getvalue()

    def format_start(self, columns: Sequence[str]) -> str:
        self.n_columns = len(columns)
        return self._line(list(columns))

    def format_row(self, row: Sequence[Any]) -> str:
        if len(row) != self.n_columns:
            raise ValueError(f"Row has {len(row)} values for {self.n_columns} columns")
        return self._line([format_value(value) for value in row])

    def format_end(self) -> str:
        return ""

    def get_file_extension(self) -> str:
        """Get the file extension for CSV output.

        Example:
            >>> CSVTableStrategy().get_file_extension()
            '.csv'
        """
        return ".csv"
