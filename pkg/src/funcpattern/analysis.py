"""End-to-end analysis of a grouped functional dataset.

`GroupPatternAnalysis` chains the steps shared by the command line and the simulation study: smooth every curve
into a B-spline basis, fit the constrained FANOVA model, test every control-versus-group contrast, export the
kernels with their significant zones, and score and classify curves against them. Each step is computed lazily
and cached, so callers pay only for what they use.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, NamedTuple, Optional

import numpy as np

from funcpattern.basis import BSplineBasis, CoefficientMatrix, GramMatrix, gram_matrix, smooth_dataset
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.fanova import DesignMatrix, FanovaKernels, FanovaModel, build_design, extract_kernels, fit_fanova
from funcpattern.fpca import EigenSystem, covariance_eigen
from funcpattern.funcdata import FunctionalDataset
from funcpattern.inference import F_MODES, ContrastSpec, TestReport, classic_test, f_series, permutation_test_curves
from funcpattern.kernelclass import (
    ClassifierModel,
    CombinationWeights,
    KernelSet,
    ScoreTable,
    build_kernel_set,
    centralize_dataset,
    predict,
    score_table,
    train_classifier,
    train_weights,
)

logger = logging.getLogger(__name__)

METHODS = ("classic", "permutation")
KNOT_PLACEMENTS = ("uniform", "quantile")


@dataclass(frozen=True)
class AnalysisSettings:
    """Tunables of the analysis pipeline.

    Attributes:
        method: ``classic`` (F-distribution critical value) or ``permutation``.
        alpha: Significance level of every contrast test.
        n_perm: Permutation replicates per contrast.
        f_mode: ``sup`` (one threshold per contrast) or ``pointwise`` permutation critical values.
        raw_f: Compute F statistics on the raw samples instead of the smoothed curves.
        min_zone_points: Shortest run of rejected grid points kept as a significant zone.
        basis_q: Number of B-spline basis functions.
        order: B-spline order (4 is cubic).
        knots: ``uniform`` or ``quantile`` interior knot placement.
        ridge: Smoothing penalty weight.
        penalty: ``l2`` or ``curvature`` roughness penalty.
        n_jobs: Worker processes for permutation replicates.
        weight_mode: Integral weight of the kernel scores, ``interval`` or ``unit``.
        interval_mode: Significant intervals used for scoring, ``contrast`` or ``union``.
        lam: Classifier regularization.
        epochs: Classifier training epochs.
        weight_epochs: Combination-weight training epochs.
        seed: Seed of every random stream.
    """

    method: str = "permutation"
    alpha: float = 0.1
    n_perm: int = 1000
    f_mode: str = "sup"
    raw_f: bool = False
    min_zone_points: int = 1
    basis_q: int = 20
    order: int = 4
    knots: str = "uniform"
    ridge: float = 1e-6
    penalty: str = "l2"
    n_jobs: int = 1
    weight_mode: str = "interval"
    interval_mode: str = "contrast"
    lam: float = 0.01
    epochs: int = 500
    weight_epochs: int = 300
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"Unknown test method {self.method!r}; expected one of {METHODS}")
        if self.f_mode not in F_MODES:
            raise ConfigError(f"Unknown F mode {self.f_mode!r}; expected one of {F_MODES}")
        if self.knots not in KNOT_PLACEMENTS:
            raise ConfigError(f"Unknown knot placement {self.knots!r}; expected one of {KNOT_PLACEMENTS}")
        if self.min_zone_points < 1:
            raise ConfigError(f"min_zone_points must be at least 1, got {self.min_zone_points!r}")
        if self.ridge < 0:
            raise ConfigError(f"ridge must be non-negative, got {self.ridge!r}")


class TrainedClassifier(NamedTuple):
    """Combination weights and the classifier trained on the combined scores."""

    weights: CombinationWeights
    model: ClassifierModel


@dataclass(frozen=True)
class Classification:
    """Predicted groups of a set of samples."""

    sample_labels: tuple[str, ...]
    true_labels: tuple[str, ...]
    predicted: tuple[str, ...]
    classes: tuple[str, ...]
    scores: Optional[ScoreTable] = field(default=None, compare=False)

    @property
    def accuracy(self) -> Optional[float]:
        """Fraction of correct predictions; None when there are no samples."""
        if not self.predicted:
            return None
        return sum(t == p for t, p in zip(self.true_labels, self.predicted)) / len(self.predicted)

    def select(self, indices: Sequence[int]) -> "Classification":
        """Keep the samples at ``indices``; the score table is dropped."""
        pick = list(indices)
        return Classification(
            tuple(self.sample_labels[i] for i in pick),
            tuple(self.true_labels[i] for i in pick),
            tuple(self.predicted[i] for i in pick),
            self.classes,
        )

    def rows(self) -> list[list[Any]]:
        return [list(row) for row in zip(self.sample_labels, self.true_labels, self.predicted)]

    def confusion_rows(self) -> list[list[Any]]:
        """``[true, predicted, count]`` for every pair of classes, in class order."""
        pairs = list(zip(self.true_labels, self.predicted))
        return [[t, p, pairs.count((t, p))] for t in self.classes for p in self.classes]

    def to_dict(self) -> dict[str, Any]:
        return {
            "samples": list(self.sample_labels),
            "true": list(self.true_labels),
            "predicted": list(self.predicted),
            "classes": list(self.classes),
            "accuracy": self.accuracy,
        }


def _sample_layout(dataset: FunctionalDataset) -> tuple[list[str], list[int]]:
    labels = [f"{group}/{unit}" for g, group in enumerate(dataset.group_labels) for unit in dataset.unit_labels[g]]
    groups = [g for g in range(dataset.G + 1) for _ in range(dataset.K)]
    return labels, groups


class GroupPatternAnalysis:
    """Smoothing, FANOVA fit, contrast tests, kernels and scoring for one dataset.

    Example:
        >>> from funcpattern.simulate import SimulationConfig, gen_dataset
        >>> dataset, truth = gen_dataset(SimulationConfig(G=1, D=1, K=6, sigma=0.05, seed=3))
        >>> analysis = GroupPatternAnalysis(dataset, AnalysisSettings(method="classic", basis_q=12))
        >>> sorted(analysis.reports)
        [(0, 1)]
    """

    def __init__(self, dataset: FunctionalDataset, settings: Optional[AnalysisSettings] = None) -> None:
        self.dataset = dataset
        self.settings = settings or AnalysisSettings()

    @cached_property
    def basis(self) -> BSplineBasis:
        s = self.settings
        if s.knots == "quantile":
            return BSplineBasis.from_quantiles(s.basis_q, self.dataset.grid.points, s.order, self.dataset.grid.T)
        return BSplineBasis.uniform(s.basis_q, s.order, self.dataset.grid.T)

    @cached_property
    def gram(self) -> GramMatrix:
        return gram_matrix(self.basis)

    @cached_property
    def coefficients(self) -> CoefficientMatrix:
        return smooth_dataset(self.dataset, self.basis, self.settings.ridge, self.settings.penalty)

    @cached_property
    def curves(self) -> np.ndarray:
        """Smoothed curves evaluated on the dataset grid, ``(G+1, D, K, n)``."""
        return self.coefficients.evaluate(self.dataset.grid.points)

    @cached_property
    def design(self) -> DesignMatrix:
        return build_design(self.dataset.G, self.dataset.K, self.dataset.D)

    @cached_property
    def model(self) -> FanovaModel:
        return fit_fanova(self.coefficients, self.design, self.gram)

    @cached_property
    def kernels(self) -> FanovaKernels:
        return extract_kernels(self.model, self.dataset.grid)

    @cached_property
    def contrasts(self) -> list[ContrastSpec]:
        return [
            ContrastSpec.for_dataset(self.dataset, d, g)
            for d in range(self.dataset.D)
            for g in range(1, self.dataset.G + 1)
        ]

    def test(self, contrast: ContrastSpec) -> TestReport:
        """Run the configured test on one contrast."""
        s = self.settings
        curves = self.dataset.values if s.raw_f else self.curves
        if s.method == "classic":
            return classic_test(f_series(curves, self.dataset.grid, contrast), s.alpha, s.min_zone_points)
        return permutation_test_curves(
            curves,
            self.dataset.grid,
            contrast,
            s.n_perm,
            s.alpha,
            s.seed,
            mode=s.f_mode,
            min_points=s.min_zone_points,
            n_jobs=s.n_jobs,
        )

    @cached_property
    def reports(self) -> dict[tuple[int, int], TestReport]:
        """Test report of every contrast keyed by ``(variate, group)``."""
        reports = {}
        for contrast in self.contrasts:
            report = self.test(contrast)
            logger.info("%s: %d significant zones", contrast.key, len(report.zones))
            reports[(contrast.variate, contrast.group)] = report
        return reports

    @cached_property
    def kernel_set(self) -> KernelSet:
        return build_kernel_set(self.kernels, self.reports, self.settings.weight_mode, self.settings.interval_mode)

    def eigen_systems(self) -> dict[str, EigenSystem]:
        """Covariance eigen-decomposition of the pooled curves of each variate."""
        return {
            variate: covariance_eigen(self.coefficients, self.gram, variate=variate)
            for variate in self.dataset.variate_labels
        }

    def _check_compatible(self, dataset: FunctionalDataset) -> None:
        if dataset.group_labels != self.dataset.group_labels or dataset.variate_labels != self.dataset.variate_labels:
            raise ContractError("Dataset groups or variates differ from the analysed dataset")

    def scores(
        self, dataset: Optional[FunctionalDataset] = None, weights: Optional[CombinationWeights] = None
    ) -> ScoreTable:
        """Raw, normalized and combined scores of every curve of ``dataset`` (the analysed one by default)."""
        dataset = dataset or self.dataset
        self._check_compatible(dataset)
        centered = centralize_dataset(dataset, self.kernels)
        D, n_points = dataset.D, len(dataset.grid)
        by_variate = np.transpose(centered, (1, 0, 2, 3)).reshape(D, -1, n_points)
        labels, _ = _sample_layout(dataset)
        return score_table(by_variate, self.kernel_set, weights, labels)

    def fit_classifier(self) -> TrainedClassifier:
        """Train combination weights and a classifier on the analysed dataset's own curves."""
        s = self.settings
        _, groups = _sample_layout(self.dataset)
        uniform = self.scores()
        weights = train_weights(
            uniform.normalized,
            groups,
            epochs=s.weight_epochs,
            seed=s.seed,
            variate_labels=self.dataset.variate_labels,
            group_labels=self.dataset.group_labels,
        )
        combined = self.scores(weights=weights).combined
        model = train_classifier(combined, groups, s.lam, s.epochs, s.seed, classes=self.dataset.group_labels)
        return TrainedClassifier(weights, model)

    def classify(self, trained: TrainedClassifier, dataset: Optional[FunctionalDataset] = None) -> Classification:
        """Predict the group of every curve set of ``dataset`` (the analysed one by default)."""
        dataset = dataset or self.dataset
        table = self.scores(dataset, trained.weights)
        labels, groups = _sample_layout(dataset)
        predicted = predict(trained.model, table.combined)
        true = [dataset.group_labels[g] for g in groups]
        return Classification(tuple(labels), tuple(true), tuple(predicted), trained.model.classes, table)
