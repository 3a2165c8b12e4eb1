"""Data model for grouped, multivariate functional samples.

A `FunctionalDataset` holds one curve per (group, variate, unit) on a shared `TimeGrid`. Curves are stored as a
read-only array ``values[g, d, k, i]``: group ``g`` (control first), variate ``d``, unit ``k`` and time point
``i``. The module also covers ingestion of per-recording CSV files listed in a manifest, linear resampling onto
a common grid, the canonical dataset CSV, train/test splits by unit, and descriptive heatmap statistics.
"""

import logging
from collections import OrderedDict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from funcpattern import rng
from funcpattern.exceptions import (
    BalanceError,
    ConfigError,
    ContractError,
    GridError,
    IngestionError,
    ParseError,
    SelectionError,
)
from funcpattern.io.series_reader import read_series
from funcpattern.output_strategies.csv_strategy import CSVTableStrategy
from funcpattern.output_strategies.table_writer import write_table

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 4
NORMALIZATION_EPS = 1e-9
MANIFEST_COLUMNS = ("file", "unit", "group")
CANONICAL_COLUMNS = ("group", "unit", "variate")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sample times on ``[0, T]``.

    Example:
        >>> grid = TimeGrid.uniform(5)
        >>> grid.points.tolist()
        [0.0, 0.25, 0.5, 0.75, 1.0]
        >>> grid.T
        1.0
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < MIN_GRID_POINTS:
            raise GridError(f"A time grid needs a 1-D array of at least {MIN_GRID_POINTS} points")
        if not np.all(np.isfinite(points)):
            raise GridError("Time grid points must be finite")
        if points[0] != 0.0:
            raise GridError(f"Time grid must start at 0, got {points[0]!r}")
        if np.any(np.diff(points) <= 0):
            raise GridError("Time grid points must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, n_points: int, T: float = 1.0) -> "TimeGrid":
        """Build an evenly spaced grid of ``n_points`` points on ``[0, T]``."""
        if T <= 0:
            raise GridError(f"Grid length T must be positive, got {T!r}")
        return cls(np.linspace(0.0, T, n_points))

    @property
    def T(self) -> float:
        return float(self.points[-1])

    def __len__(self) -> int:
        return int(self.points.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None  # type: ignore[assignment]


def rescale_times(times: Union[Sequence[float], np.ndarray], T: float = 1.0) -> np.ndarray:
    """Map increasing raw times linearly onto ``[0, T]``, endpoints exact.

    Example:
        >>> rescale_times([10, 15, 20, 30]).tolist()
        [0.0, 0.25, 0.5, 1.0]
    """
    raw = np.asarray(times, dtype=float)
    scaled = (raw - raw[0]) / (raw[-1] - raw[0]) * T
    scaled[0] = 0.0
    scaled[-1] = T
    return scaled


@dataclass(frozen=True, eq=False)
class CurveSample:
    """One sampled curve ``y_{g,d,k}`` together with the grid it was sampled on."""

    unit_id: str
    group_id: str
    variate_id: str
    values: np.ndarray
    grid: TimeGrid

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise ContractError(
                f"Curve {self.group_id}/{self.variate_id}/{self.unit_id} has {values.size} values "
                f"for a grid of {len(self.grid)} points"
            )
        if not np.all(np.isfinite(values)):
            raise ContractError(f"Curve {self.group_id}/{self.variate_id}/{self.unit_id} has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def resample_to_grid(sample: CurveSample, target: TimeGrid) -> CurveSample:
    """Linearly interpolate a curve onto another grid.

    The sample's own time axis is first rescaled so both grids span the same interval, then values are
    interpolated piecewise-linearly. Affine functions of time are reproduced exactly; endpoint values are kept.

    Raises:
        GridError: If ``target`` is not a `TimeGrid`.

    Example:
        >>> line = CurveSample("u1", "g", "v", [0.0, 0.5, 1.0, 1.5], TimeGrid(np.array([0.0, 0.5, 1.0, 1.5])))
        >>> resample_to_grid(line, TimeGrid.uniform(7, T=1.5)).values.tolist()
        [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
    """
    if not isinstance(target, TimeGrid):
        raise GridError(f"Resampling target must be a TimeGrid, got {type(target).__name__}")
    source = sample.grid.points * (target.T / sample.grid.T)
    source[-1] = target.T
    return replace(sample, values=np.interp(target.points, source, sample.values), grid=target)


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """Balanced collection of curves on one grid.

    Attributes:
        grid: Shared sample times.
        values: Read-only array of shape ``(G+1, D, K, n)``.
        group_labels: ``G+1`` group ids, control group first.
        variate_labels: ``D`` variate ids.
        unit_labels: For each group, its ``K`` unit ids in storage order.
    """

    grid: TimeGrid
    values: np.ndarray
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]
    unit_labels: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "group_labels", tuple(str(label) for label in self.group_labels))
        object.__setattr__(self, "variate_labels", tuple(str(label) for label in self.variate_labels))
        object.__setattr__(self, "unit_labels", tuple(tuple(str(u) for u in units) for units in self.unit_labels))
        if values.ndim != 4:
            raise ContractError(f"Dataset values must have shape (groups, variates, units, points), got {values.shape}")
        n_groups, n_variates, n_units, n_points = values.shape
        if n_points != len(self.grid):
            raise ContractError(f"Dataset has {n_points} points per curve but the grid has {len(self.grid)}")
        if n_groups != len(self.group_labels) or n_variates != len(self.variate_labels):
            raise ContractError("Dataset labels do not match the value array shape")
        if len(set(self.group_labels)) != n_groups or len(set(self.variate_labels)) != n_variates:
            raise ContractError("Group and variate labels must be unique")
        if len(self.unit_labels) != n_groups or any(len(units) != n_units for units in self.unit_labels):
            raise ContractError(f"Every group needs exactly {n_units} unit labels")
        if n_groups < 2 or n_variates < 1 or n_units < 2:
            raise ContractError(
                f"A dataset needs at least 2 groups, 1 variate and 2 units per cell, got "
                f"{n_groups} groups, {n_variates} variates, {n_units} units"
            )
        if not np.all(np.isfinite(values)):
            raise ContractError("Dataset values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(
        cls,
        samples: Iterable[CurveSample],
        grid: Optional[TimeGrid] = None,
        *,
        control_group: Optional[str] = None,
        sort_units: bool = True,
    ) -> "FunctionalDataset":
        """Assemble a dataset from individual curves.

        Groups and variates keep their order of first appearance, except that ``control_group`` (when given) is
        moved to the front. Curves not already on ``grid`` are resampled onto it; without ``grid`` all curves
        must share the grid of the first one.

        Raises:
            BalanceError: If the (group, variate) cells do not all hold the same number of curves.
            ContractError: If a curve is duplicated, units differ between variates of a group, grids disagree,
                or ``control_group`` is unknown.
        """
        cells: "OrderedDict[str, OrderedDict[str, dict[str, np.ndarray]]]" = OrderedDict()
        variates: list[str] = []
        for sample in samples:
            if grid is None:
                grid = sample.grid
            if sample.grid != grid:
                sample = resample_to_grid(sample, grid)
            by_variate = cells.setdefault(sample.group_id, OrderedDict())
            by_unit = by_variate.setdefault(sample.variate_id, {})
            if sample.unit_id in by_unit:
                raise ContractError(
                    f"Duplicate curve for unit {sample.unit_id!r} in {sample.group_id}/{sample.variate_id}"
                )
            by_unit[sample.unit_id] = sample.values
            if sample.variate_id not in variates:
                variates.append(sample.variate_id)
        if grid is None or not cells:
            raise ContractError("Cannot build a dataset from no samples")

        groups = list(cells)
        if control_group is not None:
            if control_group not in cells:
                raise ContractError(f"Control group {control_group!r} not among groups {groups}")
            groups.remove(control_group)
            groups.insert(0, control_group)

        counts = {(g, v): len(cells[g].get(v, {})) for g in groups for v in variates}
        if len(set(counts.values())) != 1:
            raise BalanceError(counts)

        unit_labels = []
        array = []
        for g in groups:
            units = list(cells[g][variates[0]])
            if sort_units:
                units.sort()
            for v in variates[1:]:
                if set(cells[g][v]) != set(units):
                    raise ContractError(f"Group {g!r} has different units for variates {variates[0]!r} and {v!r}")
            unit_labels.append(tuple(units))
            array.append([[cells[g][v][u] for u in units] for v in variates])
        return cls(grid, np.array(array, dtype=float), tuple(groups), tuple(variates), tuple(unit_labels))

    @property
    def G(self) -> int:
        """Number of non-control groups."""
        return len(self.group_labels) - 1

    @property
    def D(self) -> int:
        return len(self.variate_labels)

    @property
    def K(self) -> int:
        return int(self.values.shape[2])

    @property
    def N(self) -> int:
        """Total number of curves, ``(G+1)·D·K``."""
        return (self.G + 1) * self.D * self.K

    @property
    def control_group(self) -> str:
        return self.group_labels[0]

    @property
    def samples(self) -> tuple[CurveSample, ...]:
        """All curves as `CurveSample` objects, in (group, variate, unit) order."""
        return tuple(
            CurveSample(unit, group, variate, self.values[g, d, k], self.grid)
            for g, group in enumerate(self.group_labels)
            for d, variate in enumerate(self.variate_labels)
            for k, unit in enumerate(self.unit_labels[g])
        )

    def group_index(self, group: Union[int, str]) -> int:
        """Resolve a group label or index to an index.

        Raises:
            SelectionError: If the group does not exist.
        """
        return _resolve(group, self.group_labels, "group")

    def variate_index(self, variate: Union[int, str]) -> int:
        """Resolve a variate label or index to an index.

        Raises:
            SelectionError: If the variate does not exist.
        """
        return _resolve(variate, self.variate_labels, "variate")

    def cell(self, group: Union[int, str], variate: Union[int, str]) -> np.ndarray:
        """Return the ``(K, n)`` block of curves for one (group, variate) pair."""
        return np.asarray(self.values[self.group_index(group), self.variate_index(variate)])

    def subset_units(self, indices: Union[Sequence[int], np.ndarray]) -> "FunctionalDataset":
        """Keep only the units at the given positions (the same positions in every group)."""
        index = np.asarray(indices, dtype=int)
        return FunctionalDataset(
            self.grid,
            self.values[:, :, index, :],
            self.group_labels,
            self.variate_labels,
            tuple(tuple(units[i] for i in index) for units in self.unit_labels),
        )

    def with_values(self, values: np.ndarray) -> "FunctionalDataset":
        """Return a dataset with the same labels and grid but different curve values."""
        return replace(self, values=values)

    def summary(self) -> dict[str, Any]:
        return {
            "G": self.G,
            "D": self.D,
            "K": self.K,
            "N": self.N,
            "n_points": len(self.grid),
            "T": self.grid.T,
            "control_group": self.control_group,
            "groups": list(self.group_labels),
            "variates": list(self.variate_labels),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FunctionalDataset):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.group_labels == other.group_labels
            and self.variate_labels == other.variate_labels
            and self.unit_labels == other.unit_labels
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


def _resolve(key: Union[int, str], labels: Sequence[str], kind: str) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if 0 <= key < len(labels):
            return int(key)
    elif key in labels:
        return list(labels).index(key)
    raise SelectionError(f"Unknown {kind} {key!r}; expected one of {list(labels)}")


def load_dataset(
    manifest: Union[str, Path],
    data_dir: Union[str, Path],
    *,
    variates: Optional[Sequence[str]] = None,
    variate_pattern: Optional[str] = None,
    grid_points: Optional[int] = None,
    control_group: Optional[str] = None,
) -> FunctionalDataset:
    """Ingest the recordings listed in a manifest.

    The manifest is a CSV with columns ``file,unit,group``; ``file`` is relative to ``data_dir``. Every series is
    rescaled to ``[0, 1]`` and resampled onto a uniform grid whose length is the shortest series length unless
    ``grid_points`` says otherwise. Variates are the columns of the first file (optionally restricted by
    ``variates`` or ``variate_pattern``) and must be present in every file.

    Raises:
        IngestionError: If the manifest or a listed file is missing or malformed.
        ParseError: If a cell is not numeric.
        BalanceError: If groups do not all have the same number of units.
        SelectionError: If ``variates`` is given but empty.
    """
    manifest_path = Path(manifest)
    if not manifest_path.is_file():
        raise IngestionError(str(manifest_path), "manifest not found")
    try:
        entries = pd.read_csv(manifest_path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(str(manifest_path), str(e)) from e
    entries.columns = [str(column).strip() for column in entries.columns]
    missing = [column for column in MANIFEST_COLUMNS if column not in entries.columns]
    if missing:
        raise IngestionError(str(manifest_path), f"missing manifest columns {missing}")
    if entries.empty:
        raise IngestionError(str(manifest_path), "manifest lists no files")

    if variates is not None and not variates:
        raise SelectionError(f"Empty variate selection for {manifest_path}")
    tables = []
    selected: list[str] = list(variates or [])
    for row in entries.itertuples(index=False):
        path = Path(data_dir) / str(row.file).strip()
        table = read_series(path, variates=selected or None, variate_pattern=variate_pattern)
        selected = selected or list(table.variates)
        tables.append((str(row.unit).strip(), str(row.group).strip(), table))

    n_points = grid_points if grid_points is not None else min(table.times.size for _, _, table in tables)
    grid = TimeGrid.uniform(n_points)
    samples = []
    for unit, group, table in tables:
        source_grid = TimeGrid(rescale_times(table.times))
        for variate in selected:
            sample = CurveSample(unit, group, variate, table.column(variate), source_grid)
            samples.append(resample_to_grid(sample, grid))

    dataset = FunctionalDataset.from_samples(samples, grid, control_group=control_group)
    logger.info(
        "Loaded %d files: G=%d, D=%d, K=%d on a %d-point grid",
        len(tables),
        dataset.G,
        dataset.D,
        dataset.K,
        len(grid),
    )
    return dataset


def save_dataset(dataset: FunctionalDataset, path: Union[str, Path]) -> None:
    """Write the canonical dataset CSV: ``group,unit,variate,<t_0>,...`` with one row per curve."""
    columns = [*CANONICAL_COLUMNS, *(repr(float(t)) for t in dataset.grid.points)]
    rows = (
        [group, unit, variate, *dataset.values[g, d, k].tolist()]
        for g, group in enumerate(dataset.group_labels)
        for d, variate in enumerate(dataset.variate_labels)
        for k, unit in enumerate(dataset.unit_labels[g])
    )
    write_table(path, columns, rows, CSVTableStrategy())


def read_dataset(path: Union[str, Path]) -> FunctionalDataset:
    """Read a canonical dataset CSV written by `save_dataset`.

    Group, variate and unit order follow the file, so the result equals the dataset that was saved.

    Raises:
        IngestionError: If the file is missing or lacks the canonical header.
        ParseError: If a value is not numeric.
    """
    path_str = str(path)
    if not Path(path).is_file():
        raise IngestionError(path_str, "dataset file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(path_str, str(e)) from e
    if tuple(frame.columns[:3]) != CANONICAL_COLUMNS:
        raise IngestionError(path_str, f"expected header starting with {','.join(CANONICAL_COLUMNS)}")
    time_columns = list(frame.columns[3:])
    try:
        grid = TimeGrid(np.array([float(column) for column in time_columns]))
    except ValueError as e:
        raise IngestionError(path_str, f"time header is not numeric: {e}") from e

    try:
        values = frame[time_columns].to_numpy(dtype=float)
    except ValueError:
        for column in time_columns:
            bad = pd.to_numeric(frame[column], errors="coerce").isna().to_numpy()
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise ParseError(path_str, row + 1, column, frame[column].iloc[row]) from None
        raise
    samples = [
        CurveSample(unit, group, variate, values[i], grid)
        for i, (group, unit, variate) in enumerate(frame[list(CANONICAL_COLUMNS)].itertuples(index=False))
    ]
    return FunctionalDataset.from_samples(samples, grid, sort_units=False)


def split_units(dataset: FunctionalDataset, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split unit positions into train and test sets.

    The same positions are used in every group, so both halves stay balanced. At least two units always remain
    for training; the test set may be empty.

    Returns:
        Sorted ``(train, test)`` arrays of unit positions.

    Example:
        >>> grid = TimeGrid.uniform(4)
        >>> ds = FunctionalDataset(grid, np.zeros((2, 1, 10, 4)), ("a", "b"), ("v",), (tuple("0123456789"),) * 2)
        >>> train, test = split_units(ds, 0.3, seed=1)
        >>> len(train), len(test)
        (7, 3)
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in [0, 1), got {test_fraction!r}")
    order = rng.stream(seed, rng.SPLIT).permutation(dataset.K)
    n_test = min(int(round(dataset.K * test_fraction)), dataset.K - 2)
    return np.sort(order[n_test:]), np.sort(order[:n_test])


@dataclass(frozen=True)
class HeatmapCell:
    """Descriptive statistics of one (group, variate) pool of values."""

    group: str
    variate: str
    mean: float
    cv: float
    normalized: float
    cv_undefined: bool = False
    bin_means: tuple[float, ...] = ()
    bin_cvs: tuple[float, ...] = ()


@dataclass(frozen=True)
class HeatmapTable:
    """Heatmap statistics for every (group, variate) cell."""

    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]
    neutral_group: str
    cells: tuple[HeatmapCell, ...]
    n_bins: Optional[int] = None

    def cell(self, group: str, variate: str) -> HeatmapCell:
        for cell in self.cells:
            if cell.group == group and cell.variate == variate:
                return cell
        raise SelectionError(f"No heatmap cell for {group!r}/{variate!r}")

    def matrix(self, statistic: str) -> np.ndarray:
        """Return one statistic (``mean``, ``cv`` or ``normalized``) as a groups × variates array."""
        if statistic not in ("mean", "cv", "normalized"):
            raise SelectionError(f"Unknown heatmap statistic {statistic!r}")
        out = np.empty((len(self.group_labels), len(self.variate_labels)))
        for cell in self.cells:
            out[self.group_labels.index(cell.group), self.variate_labels.index(cell.variate)] = getattr(
                cell, statistic
            )
        return out

    def rank_variates(self, group: str, statistic: str = "mean") -> list[str]:
        """Variates of one group ordered from the highest to the lowest value of ``statistic``."""
        row = self.matrix(statistic)[_resolve(group, self.group_labels, "group")]
        return [self.variate_labels[i] for i in np.argsort(-row, kind="stable")]

    def rows(self) -> list[list[Any]]:
        return [[c.group, c.variate, c.mean, c.cv, c.normalized] for c in self.cells]

    def bin_rows(self) -> list[list[Any]]:
        return [
            [c.group, c.variate, b, mean, cv]
            for c in self.cells
            for b, (mean, cv) in enumerate(zip(c.bin_means, c.bin_cvs))
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "groups": list(self.group_labels),
            "variates": list(self.variate_labels),
            "neutral_group": self.neutral_group,
            "n_bins": self.n_bins,
            "cells": [
                {
                    "group": c.group,
                    "variate": c.variate,
                    "mean": c.mean,
                    "cv": c.cv,
                    "normalized": c.normalized,
                    "cv_undefined": c.cv_undefined,
                    "bin_means": list(c.bin_means),
                    "bin_cvs": list(c.bin_cvs),
                }
                for c in self.cells
            ],
        }


def _mean_cv(pool: np.ndarray) -> tuple[float, float, bool]:
    mean = float(pool.mean())
    std = float(pool.std())
    if mean == 0.0:
        return mean, 0.0, True
    return mean, std / abs(mean), False


def heatmap_stats(
    dataset: FunctionalDataset, neutral_group: str, n_bins: Optional[int] = None
) -> HeatmapTable:
    """Compute overall mean, coefficient of variation and normalized activation per (group, variate).

    Each cell pools every value of its K curves over all time points. The CV is the population standard
    deviation over the absolute mean; a cell with zero mean gets CV 0 and is flagged. Normalized activation is
    ``(mean(g, d) - mean(neutral, d)) / (std(neutral, d) + 1e-9)``. With ``n_bins`` the time axis is also cut
    into that many contiguous bins and a mean and CV are reported per bin.

    Raises:
        SelectionError: If ``neutral_group`` is not a group of the dataset.
        ConfigError: If ``n_bins`` is not between 1 and the number of grid points.
    """
    neutral = dataset.group_index(neutral_group)
    if n_bins is not None and not 1 <= n_bins <= len(dataset.grid):
        raise ConfigError(f"n_bins must lie in [1, {len(dataset.grid)}], got {n_bins!r}")

    cells = []
    for d, variate in enumerate(dataset.variate_labels):
        neutral_pool = dataset.values[neutral, d].ravel()
        neutral_mean = float(neutral_pool.mean())
        neutral_std = float(neutral_pool.std())
        for g, group in enumerate(dataset.group_labels):
            block = dataset.values[g, d]
            mean, cv, undefined = _mean_cv(block.ravel())
            if undefined:
                logger.warning("Cell %s/%s has zero mean, reporting its CV as 0", group, variate)
            bin_means: tuple[float, ...] = ()
            bin_cvs: tuple[float, ...] = ()
            if n_bins is not None:
                stats = [_mean_cv(part.ravel()) for part in np.array_split(block, n_bins, axis=1)]
                bin_means = tuple(s[0] for s in stats)
                bin_cvs = tuple(s[1] for s in stats)
            normalized = (mean - neutral_mean) / (neutral_std + NORMALIZATION_EPS)
            cells.append(HeatmapCell(group, variate, mean, cv, normalized, undefined, bin_means, bin_cvs))
    return HeatmapTable(
        dataset.group_labels, dataset.variate_labels, dataset.group_labels[neutral], tuple(cells), n_bins
    )
