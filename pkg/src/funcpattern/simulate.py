"""Synthetic data with known group effects, accuracy measures, and the noise-level sweep.

Ground truth is ``y_{g,d,k}(t) = μ_d(t) + α_{d,g}(t) + ε`` where every non-control group carries, on each variate,
a tapered bump spanning the whole domain plus a narrower raised-cosine peak at a group-specific position. The effects
are made zero-sum by subtracting the cross-group mean bump.
The true significant zone of contrast ``(0, g)`` on variate ``d`` is where ``α_{d,g} - α_{d,0}`` is nonzero.

The sweep generates data at each noise level, runs the analysis pipeline with each test method and reports three
measures: kernel dissimilarity, significant zone matching rate and classification correctness.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import trapezoid

from funcpattern import rng
from funcpattern.analysis import METHODS, AnalysisSettings, GroupPatternAnalysis
from funcpattern.basis import BSplineBasis, evaluate_coefficients
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.funcdata import FunctionalDataset, TimeGrid
from funcpattern.inference import Interval, intersection_length, merge_zones, total_length, union_intervals
from funcpattern.output_strategies.csv_strategy import CSVTableStrategy
from funcpattern.output_strategies.table_writer import write_table

logger = logging.getLogger(__name__)

SD_LEVELS = (0.05, 0.5, 1.0, 2.0, 3.0, 4.0)
TRUTH_TOL = 1e-9
DISSIMILARITY_EPS = 1e-12
CONTROL_LABEL = "control"


@dataclass(frozen=True)
class BumpSpec:
    """Tapered raised-cosine bump added to one group's curves of one variate.

    The bump is ``amplitude`` on the central ``1 - taper`` share of ``[center - width/2, center + width/2]`` and
    falls to 0 at the ends along half a cosine period.
    """

    variate: int
    group: int
    center: float
    width: float
    amplitude: float
    taper: float = 0.5

    def __post_init__(self) -> None:
        if self.width <= 0 or not 0.0 <= self.taper <= 1.0:
            raise ConfigError(f"Bump needs width > 0 and taper in [0, 1], got {self.width!r}, {self.taper!r}")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Bump values at ``t``.

        Example:
            >>> BumpSpec(0, 1, center=0.5, width=0.4, amplitude=2.0).evaluate(np.array([0.2, 0.5, 0.6])).tolist()
            [0.0, 2.0, 2.0]
        """
        half = self.width / 2.0
        distance = np.abs(np.asarray(t, dtype=float) - self.center)
        flat = (1.0 - self.taper) * half
        ramp = max(half - flat, np.finfo(float).tiny)
        phase = np.clip((distance - flat) / ramp, 0.0, 1.0)
        return np.asarray(self.amplitude * 0.5 * (1.0 + np.cos(np.pi * phase)))


def default_bumps(
    G: int, D: int, amplitude: float = 2.0, taper: float = 0.3, peak_width: float = 0.4
) -> tuple[BumpSpec, ...]:
    """Two bumps per (variate, non-control group), each of height ``amplitude / 2``.

    The first spans ``[0, 1]`` with ramps of ``taper / 2`` at either end, so the group differs from the control
    everywhere inside the domain. The second is a raised cosine of ``peak_width`` whose center is spread evenly
    over the groups, which keeps the groups apart from each other. Odd variates shift the peaks by 0.03 and flip
    the sign of both bumps.

    Example:
        >>> [(b.group, round(b.center, 2), b.width) for b in default_bumps(2, 1)]
        [(1, 0.5, 1.0), (1, 0.25, 0.4), (2, 0.5, 1.0), (2, 0.75, 0.4)]
    """
    height = amplitude / 2.0
    half = peak_width / 2.0
    bumps = []
    for d in range(D):
        shift = 0.03 * (d % 2)
        sign = 1.0 if d % 2 == 0 else -1.0
        for g in range(1, G + 1):
            center = min(max((g - 0.5) / G + shift, half), 1.0 - half)
            bumps.append(BumpSpec(d, g, 0.5, 1.0, sign * height, taper))
            bumps.append(BumpSpec(d, g, center, peak_width, sign * height, 1.0))
    return tuple(bumps)


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of the synthetic data.

    Attributes:
        G: Non-control groups.
        D: Variates.
        K: Units per group.
        n_points: Grid length on ``[0, 1]``.
        seed: Seed of the noise stream.
        sigma: Noise standard deviation.
        bumps: Group-effect bumps; `default_bumps` when not given.
        representable: Replace the true curves by spline approximations in the analysis basis, so a noiseless fit
            recovers them exactly.
        basis_q: Basis size used for ``representable``.
        order: Basis order used for ``representable``.
        amplitude: Combined height of the default bumps.
        taper: Taper share of the default domain-wide bumps.
        peak_width: Width of the default group peaks.
    """

    G: int = 3
    D: int = 2
    K: int = 24
    n_points: int = 110
    seed: int = 0
    sigma: float = 0.05
    bumps: Optional[tuple[BumpSpec, ...]] = None
    representable: bool = False
    basis_q: int = 20
    order: int = 4
    amplitude: float = 2.0
    taper: float = 0.3
    peak_width: float = 0.4

    def __post_init__(self) -> None:
        if self.G < 1 or self.D < 1 or self.K < 2:
            raise ConfigError(f"Simulation needs G >= 1, D >= 1 and K >= 2, got G={self.G}, D={self.D}, K={self.K}")
        if self.sigma < 0:
            raise ConfigError(f"Noise sd must be non-negative, got {self.sigma!r}")
        if not 0.0 < self.peak_width <= 1.0:
            raise ConfigError(f"Peak width must lie in (0, 1], got {self.peak_width!r}")
        for bump in self.bumps or ():
            if not (0 <= bump.variate < self.D and 1 <= bump.group <= self.G):
                raise ConfigError(f"Bump {bump} does not fit G={self.G}, D={self.D}")

    @property
    def bump_specs(self) -> tuple[BumpSpec, ...]:
        if self.bumps is not None:
            return self.bumps
        return default_bumps(self.G, self.D, self.amplitude, self.taper, self.peak_width)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["bumps"] = [asdict(bump) for bump in self.bump_specs]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimulationConfig":
        known = {key: data[key] for key in cls.__dataclass_fields__ if key in data}
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"Unknown simulation settings {unknown}")
        if known.get("bumps") is not None:
            known["bumps"] = tuple(BumpSpec(**bump) for bump in known["bumps"])
        return cls(**known)


def grand_mean_curve(d: int, t: np.ndarray) -> np.ndarray:
    """True grand mean of variate ``d``: ``1 + 0.5·sin(2π(t + 0.1d))``."""
    return np.asarray(1.0 + 0.5 * np.sin(2.0 * np.pi * (np.asarray(t, dtype=float) + 0.1 * d)))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """True grand means, group effects and significant zones of a simulated dataset.

    Attributes:
        grand_mean: ``(D, n)``.
        effects: ``(D, G+1, n)``; sums to zero over groups.
        zones: True zones of contrast ``(variate, group)``.
    """

    grid: TimeGrid
    grand_mean: np.ndarray
    effects: np.ndarray
    zones: dict[tuple[int, int], tuple[Interval, ...]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.grid.points.tolist(),
            "grand_mean": self.grand_mean.tolist(),
            "effects": self.effects.tolist(),
            "zones": [
                {"variate": d, "group": g, "zones": [list(zone) for zone in zones]}
                for (d, g), zones in sorted(self.zones.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GroundTruth":
        return cls(
            TimeGrid(np.asarray(data["t"], dtype=float)),
            np.asarray(data["grand_mean"], dtype=float),
            np.asarray(data["effects"], dtype=float),
            {
                (int(item["variate"]), int(item["group"])): tuple((float(a), float(b)) for a, b in item["zones"])
                for item in data["zones"]
            },
        )


def _spline_approximation(values: np.ndarray, t: np.ndarray, basis: BSplineBasis) -> np.ndarray:
    coefficients = np.apply_along_axis(lambda row: np.interp(basis.greville_abscissae(), t, row), -1, values)
    return evaluate_coefficients(coefficients, basis, t)


def ground_truth(config: SimulationConfig) -> GroundTruth:
    """Build the true curves of ``config`` on its grid."""
    grid = TimeGrid.uniform(config.n_points)
    t = grid.points
    bumps = np.zeros((config.D, config.G + 1, t.size))
    for bump in config.bump_specs:
        bumps[bump.variate, bump.group] += bump.evaluate(t)
    grand_mean = np.stack([grand_mean_curve(d, t) for d in range(config.D)])
    if config.representable:
        basis = BSplineBasis.uniform(config.basis_q, config.order)
        bumps = _spline_approximation(bumps, t, basis)
        grand_mean = _spline_approximation(grand_mean, t, basis)
    effects = bumps - bumps.mean(axis=1, keepdims=True)
    zones = {
        (d, g): tuple(merge_zones(np.abs(effects[d, g] - effects[d, 0]) > TRUTH_TOL, grid))
        for d in range(config.D)
        for g in range(1, config.G + 1)
    }
    return GroundTruth(grid, grand_mean, effects, zones)


def gen_dataset(config: SimulationConfig) -> tuple[FunctionalDataset, GroundTruth]:
    """Draw a dataset from ``config``: true curves plus i.i.d. Gaussian noise from stream ``(seed, NOISE)``.

    Example:
        >>> dataset, truth = gen_dataset(SimulationConfig(G=2, D=1, K=3, n_points=20, sigma=0.0))
        >>> dataset.group_labels
        ('control', 'group1', 'group2')
        >>> bool(np.all(dataset.values[:, :, 0] == dataset.values[:, :, 1]))
        True
    """
    truth = ground_truth(config)
    means = truth.grand_mean[None, :, None, :] + np.transpose(truth.effects, (1, 0, 2))[:, :, None, :]
    shape = (config.G + 1, config.D, config.K, config.n_points)
    noise = rng.stream(config.seed, rng.NOISE).normal(0.0, config.sigma, shape) if config.sigma > 0 else 0.0
    values = np.broadcast_to(means, shape) + noise
    width = len(str(config.K))
    dataset = FunctionalDataset(
        truth.grid,
        values,
        (CONTROL_LABEL, *(f"group{g}" for g in range(1, config.G + 1))),
        tuple(f"v{d + 1}" for d in range(config.D)),
        tuple(tuple(f"u{k + 1:0{width}d}" for k in range(config.K)) for _ in range(config.G + 1)),
    )
    return dataset, truth


def _norm(values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    return np.asarray(np.sqrt(trapezoid(values**2, grid.points, axis=-1)))


def kernel_dissimilarity(estimated: np.ndarray, truth: np.ndarray, grid: TimeGrid) -> float:
    """Mean relative L2 distance ``‖α̂ - α‖ / max(‖α‖, ε)`` over all (variate, group) kernels.

    Norms use the trapezoid rule on ``grid``.

    Example:
        >>> grid = TimeGrid.uniform(5)
        >>> truth = np.ones((1, 2, 5))
        >>> kernel_dissimilarity(2 * truth, truth, grid)
        1.0
    """
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.shape != truth.shape or estimated.shape[-1] != len(grid):
        raise ContractError(f"Kernel arrays {estimated.shape} and {truth.shape} differ or do not match the grid")
    distance = _norm(estimated - truth, grid)
    scale = np.maximum(_norm(truth, grid), DISSIMILARITY_EPS)
    return float(np.mean(distance / scale))


def zone_match_rate(
    estimated: Sequence[Interval], truth: Sequence[Interval], grid: Optional[TimeGrid] = None
) -> float:
    """Jaccard index of two interval unions measured by length.

    Both empty gives 1.0. When both unions have zero length (isolated points only) the rate is 1.0 if they are the
    same points and 0.0 otherwise.

    Example:
        >>> round(zone_match_rate([(0.0, 0.5)], [(0.25, 0.75)]), 12)
        0.333333333333
    """
    if grid is not None:
        for start, stop in [*estimated, *truth]:
            if start < 0.0 or stop > grid.T:
                raise ContractError(f"Zone [{start!r}, {stop!r}] is not within [0, {grid.T!r}]")
    union = total_length([*estimated, *truth])
    if union <= 0.0:
        return 1.0 if union_intervals(estimated) == union_intervals(truth) else 0.0
    return float(min(1.0, intersection_length(estimated, truth) / union))


@dataclass(frozen=True)
class SweepRow:
    """Measurements of one (sample size, noise level, method, replicate)."""

    sd: float
    method: str
    rep: int
    dissimilarity: float
    match_rate: float
    accuracy: float
    k: Optional[int] = None


@dataclass(frozen=True)
class SweepReport:
    """All rows of a noise sweep, ordered by (k, sd, method, rep)."""

    rows: tuple[SweepRow, ...]
    config: dict[str, Any] = field(default_factory=dict, compare=False)
    with_k: bool = False

    MEASURES = ("dissimilarity", "match_rate", "accuracy")

    def columns(self) -> list[str]:
        base = ["sd", "method", "rep", *self.MEASURES]
        return ["k", *base] if self.with_k else base

    def table_rows(self) -> list[list[Any]]:
        out = []
        for row in self.rows:
            values = [row.sd, row.method, row.rep, row.dissimilarity, row.match_rate, row.accuracy]
            out.append([row.k, *values] if self.with_k else values)
        return out

    def summary(self) -> list[dict[str, Any]]:
        """Mean of every measure per (k, sd, method), in sweep order."""
        groups: dict[tuple[Optional[int], float, str], list[SweepRow]] = {}
        for row in self.rows:
            groups.setdefault((row.k, row.sd, row.method), []).append(row)
        return [
            {
                "k": k,
                "sd": sd,
                "method": method,
                "n_reps": len(rows),
                **{measure: float(np.mean([getattr(r, measure) for r in rows])) for measure in self.MEASURES},
            }
            for (k, sd, method), rows in groups.items()
        ]

    def summary_columns(self) -> list[str]:
        return ["k", "sd", "method", "n_reps", *self.MEASURES]

    def summary_rows(self) -> list[list[Any]]:
        return [[entry[column] for column in self.summary_columns()] for entry in self.summary()]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [asdict(row) for row in self.rows],
            "summary": self.summary(),
            "config": self.config,
            "with_k": self.with_k,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SweepReport":
        return cls(
            tuple(SweepRow(**row) for row in data["rows"]),
            dict(data.get("config", {})),
            bool(data.get("with_k", False)),
        )

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_table(path, self.columns(), self.table_rows(), CSVTableStrategy())


def _replicate(
    config: SimulationConfig,
    methods: Sequence[str],
    settings: AnalysisSettings,
    holdout: bool,
    k: Optional[int],
    sd: float,
    rep: int,
) -> list[SweepRow]:
    dataset, truth = gen_dataset(config)
    test_set = gen_dataset(replace(config, seed=rng.derive_seed(config.seed, rng.HOLDOUT)))[0] if holdout else None
    rows = []
    for method in methods:
        analysis = GroupPatternAnalysis(dataset, replace(settings, method=method, n_jobs=1))
        dissimilarity = kernel_dissimilarity(analysis.kernels.effects, truth.effects, truth.grid)
        rates = [
            zone_match_rate(report.zones, truth.zones[key], truth.grid) for key, report in analysis.reports.items()
        ]
        classification = analysis.classify(analysis.fit_classifier(), test_set)
        accuracy = classification.accuracy
        rows.append(SweepRow(sd, method, rep, dissimilarity, float(np.mean(rates)), float(accuracy or 0.0), k))
    logger.debug("Sweep replicate k=%s sd=%g rep=%d done", k, sd, rep)
    return rows


def noise_sweep(
    config: SimulationConfig,
    sd_levels: Sequence[float] = SD_LEVELS,
    n_reps: int = 20,
    methods: Sequence[str] = ("classic", "permutation"),
    settings: Optional[AnalysisSettings] = None,
    *,
    k_levels: Optional[Sequence[int]] = None,
    holdout: bool = False,
    n_jobs: int = 1,
) -> SweepReport:
    """Repeat generate, smooth, fit, test and classify over noise levels (and optionally sample sizes).

    Replicate ``rep`` at level ``(k, sd)`` draws its data from a seed derived from ``config.seed`` and the level
    and replicate indices, so every method sees the same data and results do not depend on ``n_jobs``.
    Classification correctness is measured on the training data, or with ``holdout`` on an independently drawn
    dataset of the same configuration.

    Raises:
        ConfigError: If ``n_reps < 1``, a level list is empty or a method is unknown.
    """
    if n_reps < 1:
        raise ConfigError(f"n_reps must be at least 1, got {n_reps!r}")
    if not sd_levels or not methods:
        raise ConfigError("A sweep needs at least one noise level and one method")
    settings = settings or AnalysisSettings(seed=config.seed)
    unknown = [method for method in methods if method not in METHODS]
    if unknown:
        raise ConfigError(f"Unknown test methods {unknown}; expected some of {METHODS}")
    sizes: list[Optional[int]] = list(k_levels) if k_levels else [None]

    tasks = []
    for ki, k in enumerate(sizes):
        for si, sd in enumerate(sd_levels):
            for rep in range(n_reps):
                level = replace(
                    config,
                    sigma=float(sd),
                    K=config.K if k is None else int(k),
                    seed=rng.derive_seed(config.seed, rng.NOISE, ki, si, rep),
                )
                tasks.append((level, methods, settings, holdout, k, float(sd), rep))
    if n_jobs == 1:
        results = [_replicate(*task) for task in tasks]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_replicate)(*task) for task in tasks)

    method_order = {method: i for i, method in enumerate(methods)}
    size_order = {k: i for i, k in enumerate(sizes)}
    sd_order = {float(sd): i for i, sd in enumerate(sd_levels)}
    rows = sorted(
        (row for batch in results for row in batch),
        key=lambda row: (size_order[row.k], sd_order[row.sd], method_order[row.method], row.rep),
    )
    logger.info("Noise sweep finished: %d rows", len(rows))
    return SweepReport(tuple(rows), {"simulation": config.to_dict(), "n_reps": n_reps}, k_levels is not None)


def is_trend_monotone(means: Sequence[float], increasing: bool = True, tolerance: float = 0.05) -> bool:
    """Whether ``means`` moves in one direction, allowing one adjacent reversal of at most ``tolerance`` relative.

    Example:
        >>> is_trend_monotone([0.1, 0.3, 0.29, 0.5])
        True
        >>> is_trend_monotone([0.1, 0.3, 0.2, 0.5])
        False
    """
    violations = 0
    for before, after in zip(means, means[1:]):
        step = after - before if increasing else before - after
        if step < 0:
            if -step > tolerance * max(abs(before), abs(after)) or violations:
                return False
            violations += 1
    return True


EMOTIONS = ("neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised")
ACTION_UNITS = (
    "AU01",
    "AU02",
    "AU04",
    "AU05",
    "AU06",
    "AU07",
    "AU09",
    "AU10",
    "AU12",
    "AU14",
    "AU15",
    "AU17",
    "AU20",
    "AU23",
    "AU25",
    "AU26",
    "AU45",
)
EMOTION_SIGNATURES: dict[str, dict[str, float]] = {
    "neutral": {},
    "calm": {"AU45": 1.5, "AU12": 0.8},
    "happy": {"AU12": 3.5, "AU06": 2.0, "AU25": 1.0},
    "sad": {"AU01": 1.8, "AU04": 1.6, "AU15": 2.0},
    "angry": {"AU04": 2.5, "AU07": 2.0, "AU23": 1.8},
    "fearful": {"AU01": 2.0, "AU02": 1.5, "AU05": 2.2, "AU20": 1.8},
    "disgust": {"AU09": 2.6, "AU10": 2.2, "AU17": 1.0},
    "surprised": {"AU02": 2.4, "AU05": 1.6, "AU26": 2.5},
}
"""Peak intensity of the action units each emotion activates above baseline."""


def write_au_fixture(
    directory: Union[str, Path],
    seed: int = 0,
    n_actors: int = 24,
    frame_range: tuple[int, int] = (108, 112),
    noise: float = 0.15,
    baseline: float = 0.3,
) -> Path:
    """Write a synthetic facial action-unit corpus shaped like OpenFace output.

    One CSV per (actor, emotion) with columns ``frame, face_id, timestamp, confidence, success`` and one intensity
    column per action unit, padded with spaces as OpenFace does. Emotions raise their signature units along a
    bump centered in the clip, scaled per actor; intensities are clipped to ``[0, 5]``. A ``manifest.csv`` lists
    the files with the actor as unit and the emotion as group, neutral first.

    Returns:
        Path of the manifest.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for a in range(1, n_actors + 1):
        actor = f"actor{a:02d}"
        actor_gain = 0.8 + 0.4 * rng.stream(seed, rng.FIXTURE, a).random()
        for e, emotion in enumerate(EMOTIONS):
            generator = rng.stream(seed, rng.FIXTURE, a, e + 1)
            n_frames = int(generator.integers(frame_range[0], frame_range[1] + 1))
            t = np.linspace(0.0, 1.0, n_frames)
            onset = 0.5 + generator.uniform(-0.05, 0.05)
            envelope = np.exp(-0.5 * ((t - onset) / 0.18) ** 2)
            values = baseline + noise * generator.standard_normal((n_frames, len(ACTION_UNITS)))
            for unit, peak in EMOTION_SIGNATURES[emotion].items():
                values[:, ACTION_UNITS.index(unit)] += actor_gain * peak * envelope
            values = np.clip(values, 0.0, 5.0)
            name = f"{actor}_{emotion}.csv"
            rows = (
                [i + 1, 0, round(i / 30.0, 3), 0.98, 1, *(round(v, 2) for v in values[i].tolist())]
                for i in range(n_frames)
            )
            write_table(
                root / name,
                ["frame", " face_id", " timestamp", " confidence", " success", *(f" {au}" for au in ACTION_UNITS)],
                rows,
                CSVTableStrategy(),
            )
            manifest_rows.append([name, actor, emotion])
    manifest_rows.sort(key=lambda row: (EMOTIONS.index(row[2]), row[1]))
    manifest = write_table(root / "manifest.csv", ["file", "unit", "group"], manifest_rows, CSVTableStrategy())
    logger.info("Wrote %d fixture recordings to %s", len(manifest_rows), root)
    return manifest

