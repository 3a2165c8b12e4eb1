"""Output strategy base class defining the interface for table formatting.

Every tabular artifact of the package (datasets, coefficient matrices, F-series, kernels, scores, predictions,
heatmaps, sweep results) is a header plus rows of scalars. A strategy turns that into text in three phases, so
tables can be streamed to disk one row at a time.
"""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Any

import numpy as np


def format_value(value: Any) -> str:
    """Render one scalar as text.

    Floats use ``repr`` so they round-trip exactly and render identically across runs.

    Example:
        >>> [format_value(v) for v in (0.1, np.float64(2.5), 3, True, None, "AU12")]
        ['0.1', '2.5', '3', 'true', '', 'AU12']
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class TableOutputStrategy(ABC):
    """Abstract base class for table formatting strategies.

    The output process is divided into three phases:
    1. Start - header or opening bracket, given the column names
    2. Rows - one call per row, values in column order
    3. End - closing markup, if any

    Example:
        >>> class PipeStrategy(TableOutputStrategy):
        ...     def format_start(self, columns):
        ...         self.columns = list(columns)
        ...         return "|".join(columns) + "\\n"
        ...
        ...     def format_row(self, row):
        ...         return "|".join(format_value(v) for v in row) + "\\n"
        ...
        ...     def format_end(self):
        ...         return ""
        ...
        ...     def get_file_extension(self):
        ...         return ".txt"
        >>> print("".join(PipeStrategy().render(["t", "F"], [[0.0, 1.5]])), end="")
        t|F
        0.0|1.5
    """

    @abstractmethod
    def format_start(self, columns: Sequence[str]) -> str:
        """Format the opening of a table.

        Args:
            columns: Column names, in the order row values will be given.

        Returns:
            The opening text (a header line, an opening bracket, ...).
        """
        pass

    @abstractmethod
    def format_row(self, row: Sequence[Any]) -> str:
        """Format one row.

        Args:
            row: Values in column order.

        Returns:
            The formatted row.

        Raises:
            ValueError: If the row length differs from the number of columns.
        """
        pass

    @abstractmethod
    def format_end(self) -> str:
        """Format the closing of a table."""
        pass

    @abstractmethod
    def get_file_extension(self) -> str:
        """Get the appropriate file extension for this output format.

        Returns:
            The file extension including the leading dot (e.g., ".csv", ".json").
        """
        pass

    def render(self, columns: Sequence[str], rows: Any) -> Any:
        """Yield the formatted pieces of a whole table."""
        yield self.format_start(columns)
        for row in rows:
            yield self.format_row(row)
        yield self.format_end()
