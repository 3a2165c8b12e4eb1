import numpy as np
import pytest

from funcpattern.analysis import AnalysisSettings, Classification, GroupPatternAnalysis
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.inference import intersection_length
from funcpattern.simulate import SimulationConfig, gen_dataset, zone_match_rate
from tests.conftest import make_dataset

CLASSIC = AnalysisSettings(method="classic", basis_q=12)


@pytest.fixture(scope="module")
def analysis(simulated):
    dataset, _ = simulated
    return GroupPatternAnalysis(dataset, CLASSIC)


def test_settings_validation():
    for bad in ({"method": "bootstrap"}, {"f_mode": "max"}, {"knots": "random"}, {"min_zone_points": 0}, {"ridge": -1}):
        with pytest.raises(ConfigError):
            AnalysisSettings(**bad)


def test_pipeline_shapes(analysis, simulated):
    dataset, _ = simulated
    assert analysis.basis.n_basis == 12
    assert analysis.coefficients.coefficients.shape == (3, 2, 8, 12)
    assert analysis.curves.shape == dataset.values.shape
    assert analysis.kernels.effects.shape == (2, 3, 60)
    assert [c.key for c in analysis.contrasts] == ["v1__group1", "v1__group2", "v2__group1", "v2__group2"]
    assert sorted(analysis.reports) == [(0, 1), (0, 2), (1, 1), (1, 2)]
    assert analysis.kernel_set.kernels.shape == (2, 3, 60)


def test_detected_zones_overlap_truth(analysis, simulated):
    _, truth = simulated
    for key, report in analysis.reports.items():
        assert report.method == "classic"
        assert intersection_length(report.zones, truth.zones[key]) > 0.0


def test_classic_and_permutation_zones_agree_at_low_noise():
    dataset, truth = gen_dataset(SimulationConfig(sigma=0.05))
    classic = GroupPatternAnalysis(dataset, AnalysisSettings(method="classic"))
    permutation = GroupPatternAnalysis(dataset, AnalysisSettings(method="permutation", n_perm=200))
    assert sorted(classic.reports) == sorted(permutation.reports) == sorted(truth.zones)
    for key, report in classic.reports.items():
        assert zone_match_rate(report.zones, permutation.reports[key].zones, truth.grid) >= 0.8


def test_quantile_knots_and_raw_statistics(simulated):
    dataset, _ = simulated
    settings = AnalysisSettings(method="classic", basis_q=10, knots="quantile", raw_f=True)
    analysis = GroupPatternAnalysis(dataset, settings)
    assert analysis.basis.n_basis == 10
    report = analysis.test(analysis.contrasts[0])
    raw = GroupPatternAnalysis(dataset, AnalysisSettings(method="classic", basis_q=12, raw_f=True))
    np.testing.assert_array_equal(report.series.values, raw.test(raw.contrasts[0]).series.values)


def test_permutation_reports(simulated):
    dataset, _ = simulated
    analysis = GroupPatternAnalysis(dataset, AnalysisSettings(method="permutation", n_perm=100, basis_q=12, seed=4))
    report = analysis.test(analysis.contrasts[1])
    assert report.method == "permutation"
    assert report.n_replicates == 100
    assert report.seed == 4


def test_eigen_systems(analysis):
    systems = analysis.eigen_systems()
    assert list(systems) == ["v1", "v2"]
    assert systems["v1"].n_samples == 24
    assert systems["v1"].eigenvalues[0] > 0


def test_scores_and_classification(analysis, simulated):
    dataset, _ = simulated
    table = analysis.scores()
    assert table.combined.shape == (24, 3)
    assert table.sample_labels[0] == "control/u1"
    assert table.sample_labels[8] == "group1/u1"
    trained = analysis.fit_classifier()
    assert trained.weights.values.shape == (2, 3)
    result = analysis.classify(trained)
    assert result.classes == dataset.group_labels
    assert result.true_labels[:8] == ("control",) * 8
    assert result.accuracy >= 0.85


def test_classify_rejects_foreign_dataset(analysis):
    trained = analysis.fit_classifier()
    foreign = make_dataset(np.zeros((3, 2, 8, 60)))
    with pytest.raises(ContractError):
        analysis.classify(trained, foreign)


def test_classification_bookkeeping():
    result = Classification(("a/1", "b/1", "b/2"), ("a", "b", "b"), ("a", "a", "b"), ("a", "b"))
    assert result.accuracy == pytest.approx(2 / 3)
    assert result.confusion_rows() == [["a", "a", 1], ["a", "b", 0], ["b", "a", 1], ["b", "b", 1]]
    assert result.rows()[1] == ["b/1", "b", "a"]
    picked = result.select([1])
    assert picked.accuracy == 0.0
    assert picked.sample_labels == ("b/1",)
    assert result.select([]).accuracy is None
    assert result.to_dict()["predicted"] == ["a", "a", "b"]
