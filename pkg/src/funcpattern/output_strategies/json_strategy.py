"""JSON output strategy for tables.

Tables are written as a JSON array of objects, one object per row keyed by column name. Non-finite floats have
no JSON representation and are written as ``null``.
"""

import json
import math
from collections.abc import Sequence
from typing import Any

import numpy as np

from .base_strategy import TableOutputStrategy


def jsonable(value: Any) -> Any:
    """Convert numpy scalars, arrays and non-finite floats into plain JSON-compatible values.

    Example:
        >>> jsonable({"a": np.arange(3), "b": float("inf"), "c": (np.float64(0.5), None)})
        {'a': [0, 1, 2], 'b': None, 'c': [0.5, None]}
    """
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


class JSONTableStrategy(TableOutputStrategy):
    """Output strategy that formats a table as a JSON array of row objects.

    Attributes:
        columns: Column names given to `format_start`.
        rows_written: Number of rows formatted so far, used to place separators.

    Example:
        >>> strategy = JSONTableStrategy()
        >>> text = "".join(strategy.render(["t", "F"], [[0.0, 1.5], [0.5, float("nan")]]))
        >>> json.loads(text)
        [{'t': 0.0, 'F': 1.5}, {'t': 0.5, 'F': None}]
    """

    def __init__(self) -> None:
        self.encoder = json.JSONEncoder(allow_nan=False)
        self.columns: list[str] = []
        self.rows_written = 0

    def format_start(self, columns: Sequence[str]) -> str:
        self.columns = list(columns)
        self.rows_written = 0
        return "["

    def format_row(self, row: Sequence[Any]) -> str:
        if len(row) != len(self.columns):
            raise ValueError(f"Row has {len(row)} values for {len(self.columns)} columns")
        separator = "," if self.rows_written else ""
        self.rows_written += 1
        return separator + "\n  " + self.encoder.encode(jsonable(dict(zip(self.columns, row))))

    def format_end(self) -> str:
        return "\n]\n" if self.rows_written else "]\n"

    def get_file_extension(self) -> str:
        """Get the file extension for JSON output.

        Example:
            >>> JSONTableStrategy().get_file_extension()
            '.json'
        """
        return ".json"
