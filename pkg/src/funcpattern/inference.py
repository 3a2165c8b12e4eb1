"""Pointwise F-tests for control-versus-group contrasts and extraction of significant time zones.

For the contrast of control group 0 against group ``g`` on variate ``d`` the statistic at time ``t`` is::

    F(t) = (Ȳ_{d,0}(t) - Ȳ_{d,g}(t))² / (S_p²(t) · 2 / K)

where ``S_p²(t)`` pools the within-cell sums of squares of every (group, variate) cell and divides by ``N - D·G``.
The classic test compares ``F(t)`` with the ``1 - α`` quantile of ``F(1, N - D·G)``; the permutation test compares
it with a quantile of the statistic's distribution over shuffles of the ``2K`` curves of the two groups.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Optional, Union

import numpy as np
from joblib import Parallel, delayed

from funcpattern import rng
from funcpattern.basis import BSplineBasis, smooth_dataset
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.fdist import f_quantile
from funcpattern.funcdata import FunctionalDataset, TimeGrid

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-9
MIN_PERMUTATIONS = 100
MIN_TAIL_COUNT = 5
CHUNK_SIZE = 128
F_MODES = ("sup", "pointwise")

Interval = tuple[float, float]


@dataclass(frozen=True)
class ContrastSpec:
    """Control-versus-group contrast on one variate.

    Attributes:
        variate: Variate index ``d``.
        group: Index ``g`` of the group under study (``1..G``).
        G: Number of non-control groups.
        D: Number of variates.
        variate_label, group_label, control_label: Names used in reports and file names.

    Example:
        >>> contrast = ContrastSpec(variate=1, group=2, G=2, D=2)
        >>> contrast.vector.tolist()
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0]
    """

    variate: int
    group: int
    G: int
    D: int
    variate_label: str = ""
    group_label: str = ""
    control_label: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.variate < self.D:
            raise ContractError(f"Contrast variate {self.variate} out of range for D={self.D}")
        if not 1 <= self.group <= self.G:
            raise ContractError(f"Contrast group must lie in 1..{self.G}, got {self.group}")

    @classmethod
    def for_dataset(
        cls, dataset: FunctionalDataset, variate: Union[int, str], group: Union[int, str]
    ) -> "ContrastSpec":
        """Build the contrast of the control group against ``group`` on ``variate``."""
        d = dataset.variate_index(variate)
        g = dataset.group_index(group)
        labels = (dataset.variate_labels[d], dataset.group_labels[g], dataset.control_group)
        return cls(d, g, dataset.G, dataset.D, *labels)

    @property
    def vector(self) -> np.ndarray:
        """Contrast vector over the stacked coefficient functions (length ``D·(G+2)``)."""
        a = np.zeros(self.D * (self.G + 2))
        start = self.variate * (self.G + 2)
        a[start + 1] = 1.0
        a[start + 1 + self.group] = -1.0
        return a

    @property
    def key(self) -> str:
        """Stable identifier, ``<variate>__<group>``."""
        return f"{self.variate_label or self.variate}__{self.group_label or self.group}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "variate": self.variate,
            "group": self.group,
            "G": self.G,
            "D": self.D,
            "variate_label": self.variate_label,
            "group_label": self.group_label,
            "control_label": self.control_label,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ContrastSpec":
        return cls(**{key: data[key] for key in ("variate", "group", "G", "D")}, **_labels(data))


def _labels(data: Mapping[str, Any]) -> dict[str, str]:
    return {key: str(data.get(key, "")) for key in ("variate_label", "group_label", "control_label")}


@dataclass(frozen=True, eq=False)
class FStatSeries:
    """Pointwise F statistics of one contrast.

    Attributes:
        values: ``F(t_i) >= 0``; ``inf`` where the pooled variance vanishes under a nonzero difference.
        pooled_variance: ``S_p²(t_i)``.
        dof: ``(1, N - D·G)``.
        infinite_mask: Where ``values`` is infinite.
    """

    contrast: ContrastSpec
    grid: TimeGrid
    values: np.ndarray
    pooled_variance: np.ndarray
    dof: tuple[int, int]
    infinite_mask: np.ndarray
    K: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "contrast": self.contrast.to_dict(),
            "t": self.grid.points.tolist(),
            "F": self.values.tolist(),
            "pooled_variance": self.pooled_variance.tolist(),
            "dof": list(self.dof),
            "infinite": self.infinite_mask.tolist(),
            "K": self.K,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FStatSeries":
        values = np.array([np.inf if v is None else v for v in data["F"]], dtype=float)
        return cls(
            ContrastSpec.from_dict(data["contrast"]),
            TimeGrid(np.asarray(data["t"], dtype=float)),
            values,
            np.asarray(data["pooled_variance"], dtype=float),
            (int(data["dof"][0]), int(data["dof"][1])),
            np.asarray(data["infinite"], dtype=bool),
            int(data["K"]),
        )


@dataclass(frozen=True, eq=False)
class TestReport:
    """Outcome of a classic or permutation test of one contrast.

    Attributes:
        method: ``classic`` or ``permutation``.
        alpha: Significance level.
        critical: Scalar critical value; ``None`` in pointwise permutation mode, where ``critical_curve`` applies.
        reject_mask: Per time point, whether ``F(t)`` exceeds its critical value.
        zones: Disjoint sorted ``[t_start, t_end]`` intervals of rejection.
        series: The observed F series.
        mode: ``sup`` or ``pointwise`` for permutation tests, ``None`` for the classic test.
        null_distribution: Replicate statistics (``(M,)`` for sup mode, ``(M, n)`` for pointwise mode).
        critical_curve: Per-time critical values in pointwise mode.
        seed: Seed of the permutation streams.
        n_replicates: Number of replicates ``M`` actually used.
        exhaustive: Whether every split of the ``2K`` curves was enumerated.
        resolution_warning: Set when ``M·α < 5``, i.e. the tail is resolved by fewer than five replicates.
        min_points: Shortest run of rejections kept as a zone.
    """

    __test__ = False

    method: str
    alpha: float
    critical: Optional[float]
    reject_mask: np.ndarray
    zones: tuple[Interval, ...]
    series: FStatSeries
    mode: Optional[str] = None
    null_distribution: Optional[np.ndarray] = None
    critical_curve: Optional[np.ndarray] = None
    seed: Optional[int] = None
    n_replicates: int = 0
    exhaustive: bool = False
    resolution_warning: bool = False
    min_points: int = 1

    @property
    def contrast(self) -> ContrastSpec:
        return self.series.contrast

    def critical_values(self) -> np.ndarray:
        """Critical value at every grid point."""
        if self.critical_curve is not None:
            return self.critical_curve
        return np.full(len(self.series.grid), np.nan if self.critical is None else self.critical)

    def columns(self) -> list[str]:
        return ["t", "F", "critical", "reject"]

    def rows(self) -> list[list[Any]]:
        return [
            [t, f, c, bool(r)]
            for t, f, c, r in zip(
                self.series.grid.points.tolist(),
                self.series.values.tolist(),
                self.critical_values().tolist(),
                self.reject_mask.tolist(),
            )
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "critical": self.critical,
            "reject_mask": self.reject_mask.tolist(),
            "zones": [list(zone) for zone in self.zones],
            "series": self.series.to_dict(),
            "mode": self.mode,
            "null_distribution": None if self.null_distribution is None else self.null_distribution.tolist(),
            "critical_curve": None if self.critical_curve is None else self.critical_curve.tolist(),
            "seed": self.seed,
            "n_replicates": self.n_replicates,
            "exhaustive": self.exhaustive,
            "resolution_warning": self.resolution_warning,
            "min_points": self.min_points,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TestReport":
        null = data.get("null_distribution")
        curve = data.get("critical_curve")
        return cls(
            method=str(data["method"]),
            alpha=float(data["alpha"]),
            critical=None if data.get("critical") is None else float(data["critical"]),
            reject_mask=np.asarray(data["reject_mask"], dtype=bool),
            zones=tuple((float(a), float(b)) for a, b in data["zones"]),
            series=FStatSeries.from_dict(data["series"]),
            mode=data.get("mode"),
            null_distribution=None if null is None else np.asarray(null, dtype=float),
            critical_curve=None if curve is None else np.asarray(curve, dtype=float),
            seed=data.get("seed"),
            n_replicates=int(data.get("n_replicates", 0)),
            exhaustive=bool(data.get("exhaustive", False)),
            resolution_warning=bool(data.get("resolution_warning", False)),
            min_points=int(data.get("min_points", 1)),
        )


def _f_values(
    diff: np.ndarray, pooled_variance: np.ndarray, K: int, zero_tol: float
) -> tuple[np.ndarray, np.ndarray]:
    numerator = np.where(np.abs(diff) <= zero_tol, 0.0, diff**2)
    zero_variance = pooled_variance <= zero_tol**2
    with np.errstate(divide="ignore", invalid="ignore"):
        values = numerator / (pooled_variance * 2.0 / K)
    values = np.where(zero_variance, np.where(numerator > 0, np.inf, 0.0), values)
    return values, zero_variance & (numerator > 0)


def _dof(G: int, D: int, K: int) -> int:
    return (G + 1) * D * K - D * G


def f_series(
    curves: np.ndarray, grid: TimeGrid, contrast: ContrastSpec, zero_tol: float = ZERO_TOL
) -> FStatSeries:
    """Pointwise F statistics from curve values of shape ``(G+1, D, K, n)``."""
    curves = np.asarray(curves, dtype=float)
    n_groups, n_variates, K, n_points = curves.shape
    if (n_groups - 1, n_variates) != (contrast.G, contrast.D) or n_points != len(grid):
        raise ContractError(f"Curves of shape {curves.shape} do not match the contrast and grid")
    if K < 2:
        raise ContractError(f"F statistics need K >= 2 units per cell, got {K}")
    means = curves.mean(axis=2)
    pooled = ((curves - means[:, :, None, :]) ** 2).sum(axis=(0, 1, 2)) / _dof(contrast.G, contrast.D, K)
    diff = means[0, contrast.variate] - means[contrast.group, contrast.variate]
    values, infinite = _f_values(diff, pooled, K, zero_tol)
    if infinite.any():
        logger.warning("F statistic of %s is infinite at %d time points", contrast.key, int(infinite.sum()))
    return FStatSeries(contrast, grid, values, pooled, (1, _dof(contrast.G, contrast.D, K)), infinite, K)


def smoothed_curves(dataset: FunctionalDataset, basis: BSplineBasis, ridge: float, penalty: str = "l2") -> np.ndarray:
    """Smooth every curve and evaluate the fits back on the dataset grid."""
    return smooth_dataset(dataset, basis, ridge, penalty).evaluate(dataset.grid.points)


def pointwise_f(
    dataset: FunctionalDataset,
    contrast: ContrastSpec,
    basis: Optional[BSplineBasis] = None,
    ridge: float = 0.0,
    penalty: str = "l2",
    zero_tol: float = ZERO_TOL,
) -> FStatSeries:
    """Pointwise F statistics of ``contrast``.

    With a ``basis`` the statistic is computed on the smoothed curves evaluated at the grid points, which is what
    the regression sees; without one it uses the raw samples.
    """
    curves = dataset.values if basis is None else smoothed_curves(dataset, basis, ridge, penalty)
    return f_series(curves, dataset.grid, contrast, zero_tol)


def merge_zones(mask: Union[Sequence[bool], np.ndarray], grid: TimeGrid, min_points: int = 1) -> list[Interval]:
    """Turn maximal runs of true values into ``[t_start, t_end]`` intervals.

    Runs shorter than ``min_points`` are dropped.

    Example:
        >>> grid = TimeGrid.uniform(11)
        >>> mask = np.zeros(11, dtype=bool)
        >>> mask[[3, 4, 5, 9]] = True
        >>> [(round(a, 6), round(b, 6)) for a, b in merge_zones(mask, grid, min_points=2)]
        [(0.3, 0.5)]
    """
    flags = np.asarray(mask, dtype=bool)
    if flags.shape != (len(grid),):
        raise ContractError(f"Mask of shape {flags.shape} does not match a grid of {len(grid)} points")
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    zones = []
    for start, stop in zip(edges[::2], edges[1::2]):
        if stop - start >= min_points:
            zones.append((float(grid.points[start]), float(grid.points[stop - 1])))
    return zones


def union_intervals(intervals: Sequence[Interval]) -> list[Interval]:
    """Merge overlapping or touching intervals into a sorted disjoint list.

    Example:
        >>> union_intervals([(0.5, 0.7), (0.1, 0.2), (0.15, 0.3), (0.7, 0.8)])
        [(0.1, 0.3), (0.5, 0.8)]
    """
    merged: list[Interval] = []
    for start, stop in sorted((float(a), float(b)) for a, b in intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], stop))
        else:
            merged.append((start, stop))
    return merged


def total_length(intervals: Sequence[Interval]) -> float:
    """Total length covered by a set of intervals."""
    return float(sum(stop - start for start, stop in union_intervals(intervals)))


def intersection_length(first: Sequence[Interval], second: Sequence[Interval]) -> float:
    """Length of the intersection of two interval unions."""
    total = 0.0
    for a_start, a_stop in union_intervals(first):
        for b_start, b_stop in union_intervals(second):
            total += max(0.0, min(a_stop, b_stop) - max(a_start, b_start))
    return total


def classic_test(series: FStatSeries, alpha: float, min_points: int = 1) -> TestReport:
    """Reject where ``F(t)`` exceeds the ``1 - α`` quantile of ``F(1, N - D·G)``."""
    _check_alpha(alpha)
    critical = f_quantile(series.dof[0], series.dof[1], 1.0 - alpha)
    reject = series.values > critical
    return TestReport(
        method="classic",
        alpha=alpha,
        critical=critical,
        reject_mask=reject,
        zones=tuple(merge_zones(reject, series.grid, min_points)),
        series=series,
        min_points=min_points,
    )


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")


def _upper_quantile(sorted_values: np.ndarray, alpha: float) -> Any:
    """``inf {s : F_M(s) >= 1 - α}`` over the first axis of sorted replicate statistics."""
    count = sorted_values.shape[0]
    rank = max(1, math.ceil(round((1.0 - alpha) * count, 9)))
    return sorted_values[rank - 1]


def permutation_splits(seed: int, K: int, count: int) -> np.ndarray:
    """Draw ``count`` distinct ``K``-subsets of the ``2K`` pooled curves.

    Draw ``i`` takes the first ``K`` entries of a permutation from stream ``(seed, PERMUTATION, i)``; draws that
    repeat an earlier split are skipped. Rows are sorted and in order of first appearance.

    Raises:
        ConfigError: If ``count`` exceeds the ``C(2K, K)`` available splits.

    Example:
        >>> splits = permutation_splits(1, 3, 20)
        >>> len({tuple(row) for row in splits.tolist()})
        20
    """
    if count > math.comb(2 * K, K):
        raise ConfigError(f"Only {math.comb(2 * K, K)} distinct splits of {2 * K} curves, {count} requested")
    splits = np.empty((count, K), dtype=int)
    seen: set[tuple[int, ...]] = set()
    draw = 0
    while len(seen) < count:
        split = tuple(sorted(rng.stream(seed, rng.PERMUTATION, draw).permutation(2 * K)[:K].tolist()))
        draw += 1
        if split not in seen:
            splits[len(seen)] = split
            seen.add(split)
    return splits


def _replicate_chunk(
    pair: np.ndarray,
    rest_ss: np.ndarray,
    K: int,
    dof: int,
    start: int,
    subsets: np.ndarray,
    mode: str,
    zero_tol: float,
) -> tuple[int, np.ndarray]:
    total = pair.sum(axis=0)
    squares = (pair**2).sum(axis=0)
    first = pair[subsets].sum(axis=1)
    second = total - first
    pair_ss = np.clip(squares - (first**2 + second**2) / K, 0.0, None)
    pooled = (rest_ss + pair_ss) / dof
    values, _ = _f_values((first - second) / K, pooled, K, zero_tol)
    return start, values.max(axis=1) if mode == "sup" else values


def permutation_test_curves(
    curves: np.ndarray,
    grid: TimeGrid,
    contrast: ContrastSpec,
    n_perm: int,
    alpha: float,
    seed: int,
    *,
    mode: str = "sup",
    min_points: int = 1,
    n_jobs: int = 1,
    zero_tol: float = ZERO_TOL,
) -> TestReport:
    """Permutation test of ``contrast`` on curve values of shape ``(G+1, D, K, n)``; see `permutation_test`."""
    _check_alpha(alpha)
    if mode not in F_MODES:
        raise ConfigError(f"Unknown permutation mode {mode!r}; expected one of {F_MODES}")
    if n_perm < MIN_PERMUTATIONS:
        raise ConfigError(f"n_perm must be at least {MIN_PERMUTATIONS}, got {n_perm}")
    series = f_series(curves, grid, contrast, zero_tol)
    curves = np.asarray(curves, dtype=float)
    K = curves.shape[2]
    d, g = contrast.variate, contrast.group

    # Curves of the two groups in a canonical (lexicographic) order, so replicate r selects the same curves
    # whichever of the two groups is called the control.
    pair = np.concatenate([curves[0, d], curves[g, d]])
    pair = pair - pair.mean(axis=0)
    pair = pair[np.lexsort(pair.T[::-1])]
    cell_ss = ((curves - curves.mean(axis=2, keepdims=True)) ** 2).sum(axis=2)
    keep = np.ones(cell_ss.shape[:2], dtype=bool)
    keep[0, d] = keep[g, d] = False
    rest_ss = cell_ss[keep].sum(axis=0)
    dof = series.dof[1]

    n_splits = math.comb(2 * K, K)
    exhaustive = n_splits <= n_perm
    count = n_splits if exhaustive else n_perm
    subsets = np.array(list(combinations(range(2 * K), K))) if exhaustive else permutation_splits(seed, K, count)
    tasks = [
        (pair, rest_ss, K, dof, start, subsets[start : start + CHUNK_SIZE]) for start in range(0, count, CHUNK_SIZE)
    ]
    if n_jobs == 1:
        outputs = [_replicate_chunk(*task, mode, zero_tol) for task in tasks]
    else:
        outputs = Parallel(n_jobs=n_jobs)(delayed(_replicate_chunk)(*task, mode, zero_tol) for task in tasks)
    null = np.concatenate([values for _, values in sorted(outputs, key=lambda item: item[0])])

    resolution_warning = count * alpha < MIN_TAIL_COUNT
    if resolution_warning:
        logger.warning(
            "Only %d replicates for alpha=%g: the critical value rests on fewer than %d tail draws",
            count,
            alpha,
            MIN_TAIL_COUNT,
        )
    ordered = np.sort(null, axis=0)
    if mode == "sup":
        critical: Optional[float] = float(_upper_quantile(ordered, alpha))
        critical_curve = None
        reject = series.values > critical
    else:
        critical = None
        critical_curve = np.asarray(_upper_quantile(ordered, alpha), dtype=float)
        reject = series.values > critical_curve
    logger.debug("Permutation test %s: %d replicates (exhaustive=%s)", contrast.key, count, exhaustive)
    return TestReport(
        method="permutation",
        alpha=alpha,
        critical=critical,
        reject_mask=reject,
        zones=tuple(merge_zones(reject, grid, min_points)),
        series=series,
        mode=mode,
        null_distribution=null,
        critical_curve=critical_curve,
        seed=seed,
        n_replicates=count,
        exhaustive=exhaustive,
        resolution_warning=resolution_warning,
        min_points=min_points,
    )


def permutation_test(
    dataset: FunctionalDataset,
    contrast: ContrastSpec,
    n_perm: int,
    alpha: float,
    seed: int,
    *,
    basis: Optional[BSplineBasis] = None,
    ridge: float = 0.0,
    penalty: str = "l2",
    mode: str = "sup",
    min_points: int = 1,
    n_jobs: int = 1,
    zero_tol: float = ZERO_TOL,
) -> TestReport:
    """Permutation test of a control-versus-group contrast.

    Each replicate splits the ``2K`` curves of the two groups into two halves of ``K`` and recomputes the F series;
    the replicate statistic is its supremum over time (``mode="sup"``) or the whole series (``mode="pointwise"``).
    When ``C(2K, K) <= n_perm`` every split is enumerated. Otherwise ``n_perm`` distinct splits are drawn
    by `permutation_splits` before any work is handed out, so results do not depend on ``n_jobs``. The critical
    value is ``inf{s : F_M(s) >= 1 - α}``.

    Raises:
        ConfigError: If ``n_perm < 100``, ``alpha`` is outside ``(0, 1)`` or ``mode`` is unknown.
    """
    curves = dataset.values if basis is None else smoothed_curves(dataset, basis, ridge, penalty)
    return permutation_test_curves(
        curves,
        dataset.grid,
        contrast,
        n_perm,
        alpha,
        seed,
        mode=mode,
        min_points=min_points,
        n_jobs=n_jobs,
        zero_tol=zero_tol,
    )


def permutation_cdf(null_distribution: np.ndarray, s: Union[float, np.ndarray]) -> np.ndarray:
    """Empirical CDF of replicate statistics evaluated at ``s``.

    Example:
        >>> permutation_cdf(np.array([3.0, 1.0, 2.0, 2.0]), [0.5, 2.0, 3.0]).tolist()
        [0.0, 0.75, 1.0]
    """
    ordered = np.sort(np.asarray(null_distribution, dtype=float).ravel())
    return np.searchsorted(ordered, np.asarray(s, dtype=float), side="right") / ordered.size
