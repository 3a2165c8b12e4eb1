"""Kernel scores and classification of curves from the fitted group effects.

The pipeline has four steps:

1. Centralize a curve by subtracting the estimated grand mean of its variate.
2. Score it against every group's kernel (estimated effect ``α̂_{g,d}``) as ``w_{g,d}·∫_I ỹ·α̂_{g,d} dt`` over the
   significant intervals ``I`` of that group and variate.
3. Normalize the scores of one variate across groups into a probability vector.
4. Combine the variates with convex weights ``r_{d,g}`` trained so that the true group scores highest.

The combined scores then feed a linear one-vs-rest classifier.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Union

import numpy as np

from funcpattern import rng
from funcpattern.basis import evaluate_coefficients
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.fanova import FanovaKernels, FanovaModel
from funcpattern.funcdata import CurveSample, FunctionalDataset, TimeGrid
from funcpattern.inference import Interval, TestReport, total_length, union_intervals

logger = logging.getLogger(__name__)

WEIGHT_MODES = ("interval", "unit")
INTERVAL_MODES = ("contrast", "union")
SIMPLEX_TOL = 1e-9


def interval_weights(grid: TimeGrid, intervals: Sequence[Interval]) -> np.ndarray:
    """Quadrature weights ``q`` with ``Σ_i q_i·f(t_i) = ∫_I f̂(t) dt`` for the piecewise-linear interpolant ``f̂``.

    When the interval ends are grid points this is the trapezoid rule over the points inside ``I``.

    Example:
        >>> interval_weights(TimeGrid.uniform(5), [(0.25, 0.75)]).tolist()
        [0.0, 0.125, 0.25, 0.125, 0.0]
    """
    t = grid.points
    left, right = t[:-1], t[1:]
    width = right - left
    q = np.zeros(len(grid))
    for start, stop in union_intervals(intervals):
        if start < 0.0 or stop > grid.T or stop < start:
            raise ContractError(f"Interval [{start!r}, {stop!r}] is not within [0, {grid.T!r}]")
        lo = np.clip(start, left, right)
        hi = np.clip(stop, left, right)
        upper = ((hi - left) ** 2 - (lo - left) ** 2) / (2.0 * width)
        np.add.at(q, np.arange(len(width)) + 1, upper)
        np.add.at(q, np.arange(len(width)), (hi - lo) - upper)
    return q


@dataclass(frozen=True, eq=False)
class KernelSet:
    """Kernels, their significant intervals and integral weights.

    Attributes:
        grid: Grid the kernels are sampled on.
        kernels: ``(D, G+1, n)`` values of ``α̂_{g,d}``.
        intervals: ``intervals[d][g]``, disjoint sorted intervals (possibly empty, which makes the score 0).
        weights: ``(D, G+1)`` positive integral weights ``w_{g,d}``.
    """

    grid: TimeGrid
    kernels: np.ndarray
    intervals: tuple[tuple[tuple[Interval, ...], ...], ...]
    weights: np.ndarray
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        shape = (len(self.variate_labels), len(self.group_labels))
        if self.kernels.shape != (*shape, len(self.grid)):
            raise ContractError(
                f"Kernels of shape {self.kernels.shape} do not match {shape} on {len(self.grid)} points"
            )
        if self.weights.shape != shape or np.any(self.weights <= 0):
            raise ContractError(f"Integral weights must be positive with shape {shape}")
        if len(self.intervals) != shape[0] or any(len(row) != shape[1] for row in self.intervals):
            raise ContractError("Every kernel needs a matching interval set")

    @property
    def quadrature(self) -> np.ndarray:
        """``(D, G+1, n)`` weights folding ``w_{g,d}``, the interval restriction and the kernel values."""
        q = np.array([[interval_weights(self.grid, cell) for cell in row] for row in self.intervals])
        return np.asarray(self.weights[:, :, None] * q * self.kernels)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.grid.points.tolist(),
            "kernels": self.kernels.tolist(),
            "intervals": [[[list(zone) for zone in cell] for cell in row] for row in self.intervals],
            "weights": self.weights.tolist(),
            "groups": list(self.group_labels),
            "variates": list(self.variate_labels),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KernelSet":
        return cls(
            TimeGrid(np.asarray(data["t"], dtype=float)),
            np.asarray(data["kernels"], dtype=float),
            tuple(
                tuple(tuple((float(a), float(b)) for a, b in cell) for cell in row) for row in data["intervals"]
            ),
            np.asarray(data["weights"], dtype=float),
            tuple(data["groups"]),
            tuple(data["variates"]),
        )


def build_kernel_set(
    kernels: FanovaKernels,
    reports: Mapping[tuple[int, int], TestReport],
    weight_mode: str = "interval",
    interval_mode: str = "contrast",
) -> KernelSet:
    """Attach significant intervals and integral weights to the fitted kernels.

    Args:
        kernels: Group effects sampled on the dataset grid.
        reports: Test reports keyed by ``(variate, group)``; missing contrasts contribute no intervals.
        weight_mode: ``interval`` for ``w = 1/|I|`` (``1`` when ``I`` is empty), ``unit`` for ``w = 1``.
        interval_mode: ``contrast`` uses the zones of the control-versus-``g`` contrast on variate ``d`` (the
            control group takes the union over its contrasts on ``d``); ``union`` gives every kernel the union of
            all zones.

    Raises:
        ConfigError: If a mode is unknown.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"Unknown weight mode {weight_mode!r}; expected one of {WEIGHT_MODES}")
    if interval_mode not in INTERVAL_MODES:
        raise ConfigError(f"Unknown interval mode {interval_mode!r}; expected one of {INTERVAL_MODES}")
    D, n_groups = kernels.effects.shape[:2]
    zones = {key: list(report.zones) for key, report in reports.items()}
    everything = union_intervals([zone for found in zones.values() for zone in found])

    intervals = []
    for d in range(D):
        row = []
        for g in range(n_groups):
            if interval_mode == "union":
                cell = everything
            elif g == 0:
                cell = union_intervals([zone for h in range(1, n_groups) for zone in zones.get((d, h), [])])
            else:
                cell = union_intervals(zones.get((d, g), []))
            row.append(tuple(cell))
        intervals.append(tuple(row))

    weights = np.ones((D, n_groups))
    if weight_mode == "interval":
        for d in range(D):
            for g in range(n_groups):
                length = total_length(intervals[d][g])
                if length > 0:
                    weights[d, g] = 1.0 / length
    return KernelSet(
        kernels.grid, kernels.effects, tuple(intervals), weights, kernels.group_labels, kernels.variate_labels
    )


def centralize(sample: CurveSample, model: FanovaModel) -> np.ndarray:
    """Subtract the estimated grand mean of the sample's variate: ``ỹ(t_i) = y(t_i) - μ̂_d(t_i)``.

    Raises:
        ContractError: If the model has no such variate.
    """
    if sample.variate_id not in model.variate_labels:
        raise ContractError(f"Variate {sample.variate_id!r} is not part of the fitted model")
    d = model.variate_labels.index(sample.variate_id)
    return np.asarray(sample.values - evaluate_coefficients(model.grand_means()[d], model.basis, sample.grid.points))


def centralize_curves(curves: np.ndarray, grand_mean: np.ndarray) -> np.ndarray:
    """Centralize curve values ``(..., D, K, n)`` with grand means sampled on the same grid, ``(D, n)``."""
    curves = np.asarray(curves, dtype=float)
    if curves.shape[-3] != grand_mean.shape[0] or curves.shape[-1] != grand_mean.shape[1]:
        raise ContractError(f"Curves of shape {curves.shape} do not match grand means of shape {grand_mean.shape}")
    return np.asarray(curves - grand_mean[:, None, :])


def centralize_dataset(dataset: FunctionalDataset, kernels: FanovaKernels) -> np.ndarray:
    """Centralized values of every curve in ``dataset``, ``(G+1, D, K, n)``."""
    if dataset.variate_labels != kernels.variate_labels or dataset.grid != kernels.grid:
        raise ContractError("Dataset variates or grid differ from the fitted kernels")
    return centralize_curves(dataset.values, kernels.grand_mean)


def score(centered: np.ndarray, kernels: KernelSet, g: Union[int, str], d: Union[int, str]) -> float:
    """Kernel score ``w_{g,d}·∫_I ỹ(t)·α̂_{g,d}(t) dt`` of one centered curve; 0 when ``I`` is empty."""
    gi = _position(g, kernels.group_labels, "group")
    di = _position(d, kernels.variate_labels, "variate")
    values = np.asarray(centered, dtype=float)
    if values.shape != (len(kernels.grid),):
        raise ContractError(f"Centered curve of shape {values.shape} does not match the kernel grid")
    q = interval_weights(kernels.grid, kernels.intervals[di][gi])
    return float(kernels.weights[di, gi] * np.sum(q * values * kernels.kernels[di, gi]))


def score_curves(centered: np.ndarray, kernels: KernelSet) -> np.ndarray:
    """Raw scores of many centered curves.

    Args:
        centered: ``(D, M, n)`` centered values of ``M`` samples, one curve per variate.

    Returns:
        ``(M, G+1, D)`` raw scores ``S_{g,d,k}``.
    """
    centered = np.asarray(centered, dtype=float)
    D, n_groups, n_points = kernels.kernels.shape
    if centered.ndim != 3 or centered.shape[0] != D or centered.shape[2] != n_points:
        raise ContractError(f"Centered curves of shape {centered.shape} do not match the kernel set")
    return np.asarray(np.einsum("dgi,dki->kgd", kernels.quadrature, centered))


def _position(key: Union[int, str], labels: Sequence[str], kind: str) -> int:
    if isinstance(key, str):
        if key not in labels:
            raise ContractError(f"Unknown {kind} {key!r}")
        return labels.index(key)
    if not 0 <= key < len(labels):
        raise ContractError(f"{kind.capitalize()} index {key!r} out of range")
    return int(key)


class NormalizedScores(NamedTuple):
    """Normalized scores and, per normalized vector, whether it fell back to uniform."""

    values: np.ndarray
    degenerate: np.ndarray


def normalize_scores(raw: np.ndarray, axis: int = -1) -> NormalizedScores:
    """Shift by ``-min(0, min_g S)`` and divide by the sum, along ``axis``.

    Non-finite scores are left out and normalize to 0. A vector whose shifted values are all zero, or that has no
    finite score, becomes uniform and is flagged as degenerate.

    Example:
        >>> normalize_scores(np.array([2.0, 1.0, 1.0])).values.tolist()
        [0.5, 0.25, 0.25]
        >>> normalize_scores(np.array([-1.0, 0.0])).values.tolist()
        [0.0, 1.0]
    """
    raw = np.moveaxis(np.asarray(raw, dtype=float), axis, -1)
    if raw.shape[-1] < 1:
        raise ContractError("Score normalization needs at least one group")
    finite = np.isfinite(raw)
    masked = np.where(finite, raw, 0.0)
    lowest = np.where(finite, raw, np.inf).min(axis=-1, keepdims=True)
    shift = -np.minimum(0.0, np.where(np.isfinite(lowest), lowest, 0.0))
    shifted = np.where(finite, masked + shift, 0.0)
    totals = shifted.sum(axis=-1, keepdims=True)
    degenerate = totals[..., 0] <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(totals > 0.0, shifted / totals, 1.0 / raw.shape[-1])
    if degenerate.any():
        logger.warning("%d score vectors are degenerate and were normalized to uniform", int(degenerate.sum()))
    return NormalizedScores(np.moveaxis(values, -1, axis), degenerate)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex ``{x : x >= 0, Σx = 1}``.

    Sorts ``v`` in decreasing order, finds the number of positive components of the solution and thresholds.

    Example:
        >>> project_simplex(np.array([0.5, 0.5])).tolist()
        [0.5, 0.5]
        >>> project_simplex(np.array([2.0, 0.0])).tolist()
        [1.0, 0.0]
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u * np.arange(1, v.size + 1) > cumulative)[-1]
    theta = cumulative[rho] / (rho + 1.0)
    w = np.clip(v - theta, 0.0, None)
    return np.asarray(w / w.sum())


@dataclass(frozen=True, eq=False)
class CombinationWeights:
    """Convex weights ``r_{d,g}`` combining the variates' normalized scores for each group.

    Attributes:
        values: ``(D, G+1)``; every column lies on the probability simplex.
    """

    values: np.ndarray
    variate_labels: tuple[str, ...] = ()
    group_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ContractError(f"Combination weights must be a (D, G) matrix, got shape {values.shape}")
        if np.any(values < 0.0) or np.any(values > 1.0) or np.any(np.abs(values.sum(axis=0) - 1.0) > SIMPLEX_TOL):
            raise ContractError("Every column of the combination weights must lie on the probability simplex")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, D: int, n_groups: int, **labels: Any) -> "CombinationWeights":
        return cls(np.full((D, n_groups), 1.0 / D), **labels)

    @property
    def D(self) -> int:
        return int(self.values.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {"r": self.values.tolist(), "variates": list(self.variate_labels), "groups": list(self.group_labels)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CombinationWeights":
        return cls(np.asarray(data["r"], dtype=float), tuple(data.get("variates", ())), tuple(data.get("groups", ())))


def combine_scores(normalized: np.ndarray, weights: CombinationWeights, g: Optional[int] = None) -> np.ndarray:
    """Combined scores ``S^comb_{g,k} = Σ_d r_{d,g}·S̃_{g,d,k}``.

    Args:
        normalized: ``(..., G+1, D)`` normalized scores.
        weights: Combination weights of shape ``(D, G+1)``.
        g: A single group to combine; all groups when omitted.

    Returns:
        ``(..., G+1)`` combined scores, or ``(...)`` when ``g`` is given.

    Example:
        >>> r = CombinationWeights(np.array([[0.5, 0.25], [0.5, 0.75]]))
        >>> [round(v, 12) for v in combine_scores(np.array([[1.0, 1.0], [0.8, 0.4]]), r).tolist()]
        [1.0, 0.5]
    """
    normalized = np.asarray(normalized, dtype=float)
    if normalized.shape[-2:] != weights.values.T.shape:
        raise ContractError(
            f"Normalized scores of shape {normalized.shape} do not match weights for {weights.values.shape}"
        )
    combined = np.einsum("...gd,dg->...g", normalized, weights.values)
    if g is None:
        return np.asarray(combined)
    return np.asarray(combined[..., g])


def _margins(normalized: np.ndarray, r: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    combined = np.einsum("kgd,dg->kg", normalized, r)
    rivals = combined.copy()
    rivals[np.arange(labels.size), labels] = -np.inf
    rival = rivals.argmax(axis=1)
    return combined[np.arange(labels.size), labels] - combined[np.arange(labels.size), rival], rival


def train_weights(
    normalized: np.ndarray,
    labels: Union[Sequence[int], np.ndarray],
    *,
    epochs: int = 300,
    step: float = 0.5,
    seed: int = 0,
    batch_size: Optional[int] = None,
    variate_labels: tuple[str, ...] = (),
    group_labels: tuple[str, ...] = (),
) -> CombinationWeights:
    """Train combination weights that make each sample's own group score highest.

    Maximizes the mean margin ``S^comb_{y_k,k} - max_{g≠y_k} S^comb_{g,k}`` over the product of simplices by
    projected subgradient ascent with step ``step/√t``. All groups' columns are updated together because a rival's
    score depends on the rival's weights. The best iterate seen is returned. With ``batch_size`` each step uses a
    seeded mini-batch; otherwise every step uses all samples.

    Args:
        normalized: ``(M, G+1, D)`` normalized scores of the training samples.
        labels: True group index of each sample.

    Raises:
        ContractError: If shapes disagree or a group has no training sample.
    """
    normalized = np.asarray(normalized, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if normalized.ndim != 3 or labels.shape != (normalized.shape[0],):
        raise ContractError(f"Scores of shape {normalized.shape} do not match {labels.size} labels")
    M, n_groups, D = normalized.shape
    counts = np.bincount(labels, minlength=n_groups)
    if counts.size != n_groups or np.any(counts == 0):
        raise ContractError(f"Every group needs at least one training sample, got counts {counts.tolist()}")
    names = {"variate_labels": variate_labels, "group_labels": group_labels}
    if D == 1:
        return CombinationWeights(np.ones((1, n_groups)), **names)

    generator = rng.stream(seed, rng.TRAINING)
    r = np.full((D, n_groups), 1.0 / D)
    best, best_objective = r.copy(), float(_margins(normalized, r, labels)[0].mean())
    for t in range(1, epochs + 1):
        batch = np.arange(M) if batch_size is None or batch_size >= M else generator.choice(M, batch_size, False)
        _, rival = _margins(normalized[batch], r, labels[batch])
        gradient = np.zeros_like(r)
        np.add.at(gradient.T, labels[batch], normalized[batch, labels[batch]])
        np.add.at(gradient.T, rival, -normalized[batch, rival])
        r = r + step / np.sqrt(t) * gradient / batch.size
        r = np.stack([project_simplex(column) for column in r.T], axis=1)
        objective = float(_margins(normalized, r, labels)[0].mean())
        if objective > best_objective:
            best, best_objective = r.copy(), objective
    logger.debug("Combination weights reached mean margin %.6g after %d epochs", best_objective, epochs)
    return CombinationWeights(best, **names)


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Linear one-vs-rest classifier.

    Attributes:
        weights: ``(C, F+1)``; the last column is the bias.
        classes: Class labels; prediction ties go to the lowest index.
        lam: Regularization strength used in training.
    """

    weights: np.ndarray
    classes: tuple[str, ...]
    lam: float
    epochs: int
    seed: int

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[1] - 1)

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        """Per-class linear scores, ``(M, C)``."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != self.n_features:
            raise ContractError(f"Expected {self.n_features} features per sample, got {features.shape[1]}")
        return np.asarray(_augment(features) @ self.weights.T)

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "classes": list(self.classes),
            "lam": self.lam,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClassifierModel":
        return cls(
            np.asarray(data["weights"], dtype=float),
            tuple(str(c) for c in data["classes"]),
            float(data["lam"]),
            int(data["epochs"]),
            int(data["seed"]),
        )


def _augment(features: np.ndarray) -> np.ndarray:
    return np.hstack([features, np.ones((features.shape[0], 1))])


class ClassifierTrainer(ABC):
    """Interface of classifier training algorithms."""

    @abstractmethod
    def train(self, features: np.ndarray, labels: np.ndarray, classes: tuple[str, ...]) -> ClassifierModel:
        """Fit a model on ``features`` ``(M, F)`` with integer ``labels`` indexing ``classes``."""
        pass


class PegasosTrainer(ClassifierTrainer):
    """One-vs-rest linear SVM trained with the Pegasos subgradient schedule ``η_t = 1/(λt)``.

    Each class is separated from the rest by minimizing ``λ/2·‖w‖² + mean hinge loss``. The bias is an appended
    constant feature. Steps use all samples unless ``batch_size`` selects seeded mini-batches, and after each step
    ``w`` is projected onto the ball of radius ``1/√λ``.
    """

    def __init__(
        self,
        lam: float = 0.01,
        epochs: int = 500,
        seed: int = 0,
        batch_size: Optional[int] = None,
        project: bool = True,
    ) -> None:
        if lam <= 0 or epochs < 1:
            raise ConfigError(f"Pegasos needs lam > 0 and epochs >= 1, got lam={lam!r}, epochs={epochs!r}")
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.batch_size = batch_size
        self.project = project

    def _fit_binary(self, X: np.ndarray, y: np.ndarray, generator: np.random.Generator) -> np.ndarray:
        w = np.zeros(X.shape[1])
        for t in range(1, self.epochs + 1):
            if self.batch_size is None or self.batch_size >= X.shape[0]:
                batch = np.arange(X.shape[0])
            else:
                batch = generator.choice(X.shape[0], self.batch_size, replace=False)
            eta = 1.0 / (self.lam * t)
            violators = batch[y[batch] * (X[batch] @ w) < 1.0]
            w = (1.0 - eta * self.lam) * w + eta / batch.size * (y[violators] @ X[violators])
            if self.project:
                norm = np.linalg.norm(w)
                radius = 1.0 / np.sqrt(self.lam)
                if norm > radius:
                    w = w * (radius / norm)
        return w

    def train(self, features: np.ndarray, labels: np.ndarray, classes: tuple[str, ...]) -> ClassifierModel:
        X = _augment(features)
        rows = []
        for c in range(len(classes)):
            y = np.where(labels == c, 1.0, -1.0)
            rows.append(self._fit_binary(X, y, rng.stream(self.seed, rng.TRAINING, c)))
        return ClassifierModel(np.vstack(rows), classes, self.lam, self.epochs, self.seed)


def _class_index(label: Union[int, str], names: tuple[str, ...], indexed: bool) -> int:
    """Position of ``label`` in ``names``; integers index explicitly given classes, otherwise they are names."""
    if indexed and isinstance(label, int):
        if not 0 <= label < len(names):
            raise ContractError(f"Label index {label} is out of range for classes {list(names)}")
        return label
    if str(label) not in names:
        raise ContractError(f"Label {label!r} is not among the classes {list(names)}")
    return names.index(str(label))


def train_classifier(
    features: np.ndarray,
    labels: Union[Sequence[Union[int, str]], np.ndarray],
    lam: float = 0.01,
    epochs: int = 500,
    seed: int = 0,
    *,
    classes: Optional[Sequence[str]] = None,
    batch_size: Optional[int] = None,
    trainer: Optional[ClassifierTrainer] = None,
) -> ClassifierModel:
    """Train a linear classifier on combined score vectors.

    Args:
        features: ``(M, F)`` feature rows.
        labels: One label per row. Integers index ``classes`` when it is given; otherwise every label is a name.
        classes: Class order used for ties; defaults to the sorted distinct labels.
        trainer: Training algorithm; `PegasosTrainer` with ``lam``, ``epochs``, ``seed`` and ``batch_size`` by default.

    Raises:
        ContractError: If fewer than two classes are present, a label matches no class or shapes disagree.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    raw = list(np.asarray(labels).tolist())
    if len(raw) != features.shape[0]:
        raise ContractError(f"{features.shape[0]} feature rows but {len(raw)} labels")
    indexed = classes is not None
    names = tuple(str(c) for c in (classes if classes is not None else sorted(set(raw))))
    indices = np.array([_class_index(c, names, indexed) for c in raw], dtype=int)
    if np.unique(indices).size < 2:
        raise ContractError("Classifier training needs at least two classes")
    trainer = trainer or PegasosTrainer(lam, epochs, seed, batch_size)
    model = trainer.train(features, indices, names)
    logger.debug("Trained %d-class classifier on %d samples", len(names), features.shape[0])
    return model


def predict(model: ClassifierModel, features: np.ndarray) -> list[str]:
    """Predicted class of every feature row; exact ties go to the lowest class index."""
    return [model.classes[i] for i in model.decision_function(features).argmax(axis=1)]


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Raw, normalized and combined scores of a set of samples.

    Attributes:
        sample_labels: One id per sample.
        raw: ``(M, G+1, D)``.
        normalized: ``(M, G+1, D)``; normalized across groups.
        degenerate: ``(M, D)`` flags of uniform fallbacks.
        combined: ``(M, G+1)``.
    """

    sample_labels: tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray
    degenerate: np.ndarray
    combined: np.ndarray
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]

    def columns(self) -> list[str]:
        return ["unit", "group", "variate", "raw", "normalized", "combined"]

    def rows(self) -> list[list[Any]]:
        out: list[list[Any]] = []
        for k, unit in enumerate(self.sample_labels):
            for g, group in enumerate(self.group_labels):
                for d, variate in enumerate(self.variate_labels):
                    out.append(
                        [
                            unit,
                            group,
                            variate,
                            float(self.raw[k, g, d]),
                            float(self.normalized[k, g, d]),
                            float(self.combined[k, g]),
                        ]
                    )
        return out


def score_table(
    centered: np.ndarray, kernels: KernelSet, weights: Optional[CombinationWeights], sample_labels: Sequence[str]
) -> ScoreTable:
    """Run steps 2 to 4 on ``(D, M, n)`` centered curves; uniform weights stand in when ``weights`` is None."""
    raw = score_curves(centered, kernels)
    normalized = normalize_scores(raw, axis=1)
    D, n_groups = kernels.weights.shape
    weights = weights or CombinationWeights.uniform(D, n_groups)
    return ScoreTable(
        tuple(sample_labels),
        raw,
        normalized.values,
        normalized.degenerate,
        combine_scores(normalized.values, weights),
        kernels.group_labels,
        kernels.variate_labels,
    )
