import numpy as np
import pytest

from funcpattern.analysis import AnalysisSettings, GroupPatternAnalysis
from funcpattern.exceptions import SelectionError
from funcpattern.funcdata import heatmap_stats
from funcpattern.plotting import plot_f_series, plot_heatmap, plot_kernels, plot_sweep
from funcpattern.simulate import SweepReport, SweepRow
from tests.conftest import make_dataset


@pytest.fixture(scope="module")
def analysis(simulated):
    dataset, _ = simulated
    return GroupPatternAnalysis(dataset, AnalysisSettings(method="classic", basis_q=10))


def assert_svg(path):
    assert path.is_file()
    text = path.read_text(encoding="utf-8")
    assert "<svg" in text


def test_plot_kernels(analysis, tmp_path):
    report = analysis.reports[(0, 1)]
    path = plot_kernels(analysis.kernels, 0, report.zones, tmp_path / "plots" / "kernels.svg")
    assert_svg(path)


def test_plot_f_series_is_reproducible(analysis, tmp_path):
    report = analysis.reports[(1, 2)]
    first = plot_f_series(report, tmp_path / "a.svg")
    second = plot_f_series(report, tmp_path / "b.svg")
    assert_svg(first)
    assert first.read_bytes() == second.read_bytes()


def test_plot_heatmap(tmp_path):
    values = 0.5 + np.abs(np.random.default_rng(3).normal(size=(3, 4, 2, 10)))
    table = heatmap_stats(make_dataset(values), "g0")
    for statistic in ("mean", "cv", "normalized"):
        assert_svg(plot_heatmap(table, statistic, tmp_path / f"{statistic}.svg"))
    with pytest.raises(SelectionError):
        plot_heatmap(table, "median", tmp_path / "median.svg")


def test_plot_sweep(tmp_path):
    rows = tuple(
        SweepRow(sd, method, rep, 0.1 * sd, 1.0 / (1.0 + sd), 0.9)
        for sd in (0.5, 1.0)
        for method in ("classic", "permutation")
        for rep in range(2)
    )
    report = SweepReport(rows, {}, False)
    for measure in SweepReport.MEASURES:
        assert_svg(plot_sweep(report, measure, tmp_path / f"{measure}.svg"))
