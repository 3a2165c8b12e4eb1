"""Reading of per-recording time-series CSV files.

Each file holds one recording: a header row, one time column (``time``, ``timestamp`` or ``frame``) and one
column per variate. OpenFace exports pad their headers with spaces and carry bookkeeping columns (face id,
confidence, success flag) next to the action-unit intensities; both are handled here so the rest of the package
only sees clean numeric arrays.
"""

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from funcpattern.exceptions import GridError, IngestionError, ParseError

logger = logging.getLogger(__name__)

TIME_COLUMNS = ("time", "timestamp", "frame")
"""Candidate time columns, in order of preference."""

METADATA_COLUMNS = frozenset({"time", "timestamp", "frame", "face_id", "confidence", "success"})
"""Columns that never count as variates."""


@dataclass(frozen=True)
class SeriesTable:
    """Numeric content of one recording.

    Attributes:
        path: File the table was read from.
        times: Raw time stamps (or frame numbers), strictly increasing.
        variates: Names of the variate columns, in file order.
        values: Array of shape ``(len(times), len(variates))``.
    """

    path: str
    times: np.ndarray
    variates: tuple[str, ...]
    values: np.ndarray

    def column(self, variate: str) -> np.ndarray:
        """Return the samples of one variate.

        Raises:
            IngestionError: If the file has no such column.
        """
        try:
            index = self.variates.index(variate)
        except ValueError:
            raise IngestionError(self.path, f"missing variate column {variate!r}") from None
        return self.values[:, index]


def _numeric_column(frame: pd.DataFrame, column: str, path: str) -> np.ndarray:
    converted = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(converted)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(path, row + 1, column, frame[column].iloc[row])
    return converted


def read_series(
    path: Union[str, Path],
    *,
    variates: Optional[Sequence[str]] = None,
    variate_pattern: Optional[str] = None,
) -> SeriesTable:
    """Read one recording from a CSV file.

    Args:
        path: CSV file to read (UTF-8, decimal point).
        variates: Explicit variate columns to keep, in the order given. Defaults to every non-metadata column.
        variate_pattern: Regular expression that variate column names must fully match (e.g. ``AU\\d+_r``).
            Ignored when ``variates`` is given.

    Returns:
        The parsed table.

    Raises:
        IngestionError: If the file is missing, unreadable, has no time column, or lacks a requested variate.
        ParseError: If a cell of the time column or of a variate column is not a finite number.
        GridError: If the time column is not strictly increasing or has fewer than two rows.

    Example:
        >>> import tempfile, os
        >>> with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as f:
        ...     _ = f.write("frame, AU12\\n1, 0.5\\n2, 1.5\\n3, 2.5\\n")
        >>> table = read_series(f.name)
        >>> table.variates
        ('AU12',)
        >>> table.column("AU12").tolist()
        [0.5, 1.5, 2.5]
        >>> os.unlink(f.name)
    """
    path_str = str(path)
    if not Path(path).is_file():
        raise IngestionError(path_str, "file not found")
    try:
        frame = pd.read_csv(path, skipinitialspace=True, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(path_str, str(e)) from e
    frame.columns = [str(column).strip() for column in frame.columns]

    time_column = next((column for column in TIME_COLUMNS if column in frame.columns), None)
    if time_column is None:
        raise IngestionError(path_str, f"no time column (expected one of {', '.join(TIME_COLUMNS)})")

    if variates is not None:
        missing = [variate for variate in variates if variate not in frame.columns]
        if missing:
            raise IngestionError(path_str, f"missing variate columns {missing}")
        selected = list(variates)
    else:
        selected = [column for column in frame.columns if column not in METADATA_COLUMNS]
        if variate_pattern is not None:
            pattern = re.compile(variate_pattern)
            selected = [column for column in selected if pattern.fullmatch(column)]
    if not selected:
        raise IngestionError(path_str, "no variate columns")

    times = _numeric_column(frame, time_column, path_str)
    if times.size < 2 or np.any(np.diff(times) <= 0):
        raise GridError(f"Time column {time_column!r} of {path_str} must be strictly increasing with two or more rows")

    values = np.column_stack([_numeric_column(frame, column, path_str) for column in selected])
    logger.debug("Read %s: %d rows, %d variates", path_str, times.size, len(selected))
    return SeriesTable(path=path_str, times=times, variates=tuple(selected), values=values)
