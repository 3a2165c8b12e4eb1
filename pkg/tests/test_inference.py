import logging

import numpy as np
import pytest

from funcpattern.basis import BSplineBasis
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.fdist import f_quantile
from funcpattern.funcdata import TimeGrid
from funcpattern.inference import (
    ContrastSpec,
    TestReport,
    classic_test,
    f_series,
    intersection_length,
    merge_zones,
    permutation_cdf,
    permutation_splits,
    permutation_test,
    permutation_test_curves,
    pointwise_f,
    smoothed_curves,
    total_length,
    union_intervals,
)
from funcpattern.output_strategies.json_strategy import jsonable
from tests.conftest import make_dataset

CONTRAST = ContrastSpec(variate=0, group=1, G=1, D=1)


def noise(seed, shape, scale=1.0):
    return np.random.default_rng(seed).normal(scale=scale, size=shape)


def shifted_curves(seed, K=6, n_points=101, shift=5.0, sd=0.05):
    """Group 1 is shifted by ``shift`` on [0.3, 0.5]."""
    grid = TimeGrid.uniform(n_points)
    curves = noise(seed, (2, 1, K, n_points), sd)
    inside = (grid.points >= 0.3 - 1e-9) & (grid.points <= 0.5 + 1e-9)
    curves[1, 0, :, inside] += shift
    return curves, grid


def test_contrast_spec():
    contrast = ContrastSpec(variate=1, group=2, G=3, D=2, variate_label="AU04", group_label="sad")
    assert contrast.key == "AU04__sad"
    assert ContrastSpec(variate=0, group=1, G=1, D=1).key == "0__1"
    assert ContrastSpec.from_dict(contrast.to_dict()) == contrast
    with pytest.raises(ContractError):
        ContrastSpec(variate=0, group=0, G=1, D=1)
    with pytest.raises(ContractError):
        ContrastSpec(variate=2, group=1, G=1, D=2)


def test_contrast_for_dataset(random_dataset):
    contrast = ContrastSpec.for_dataset(random_dataset, "v1", "g2")
    assert (contrast.variate, contrast.group, contrast.G, contrast.D) == (1, 2, 2, 2)
    assert contrast.control_label == "g0"
    assert contrast.key == "v1__g2"


def test_identical_groups_give_zero_statistic():
    curves = np.repeat(noise(0, (1, 1, 4, 10)), 2, axis=0)
    series = f_series(curves, TimeGrid.uniform(10), CONTRAST)
    assert np.all(series.values == 0.0)
    assert not series.infinite_mask.any()


def test_statistic_is_scale_invariant():
    curves = noise(1, (3, 2, 5, 12))
    contrast = ContrastSpec(variate=1, group=2, G=2, D=2)
    grid = TimeGrid.uniform(12)
    np.testing.assert_allclose(f_series(2.0 * curves, grid, contrast).values, f_series(curves, grid, contrast).values)


def test_statistic_matches_hand_computation():
    control = np.array([[1.0, 2.0, 0.0, 4.0], [2.0, 2.5, 1.0, 3.0], [0.0, 1.0, 0.5, 5.0]])
    group = np.array([[3.0, 0.0, 1.0, 4.5], [4.0, 1.0, 2.0, 4.0], [5.0, 0.5, 0.0, 6.0]])
    series = f_series(np.stack([control[None], group[None]]), TimeGrid.uniform(4), CONTRAST)
    for i in range(4):
        c, g = control[:, i], group[:, i]
        ss = ((c - c.mean()) ** 2).sum() + ((g - g.mean()) ** 2).sum()
        pooled = ss / (6 - 1)
        expected = (c.mean() - g.mean()) ** 2 / (pooled * 2.0 / 3.0)
        assert series.values[i] == pytest.approx(expected, rel=1e-12)
    assert series.dof == (1, 5)


def test_zero_variance_with_difference_is_infinite(caplog):
    caplog.set_level(logging.WARNING, logger="funcpattern")
    curves = np.zeros((2, 1, 3, 5))
    curves[1, 0, :, 2] = 1.0
    series = f_series(curves, TimeGrid.uniform(5), CONTRAST)
    assert np.isinf(series.values[2])
    assert series.infinite_mask.tolist() == [False, False, True, False, False]
    assert np.all(series.values[[0, 1, 3, 4]] == 0.0)
    assert "infinite" in caplog.text


def test_statistic_errors():
    grid = TimeGrid.uniform(5)
    with pytest.raises(ContractError):
        f_series(np.zeros((2, 1, 1, 5)), grid, CONTRAST)
    with pytest.raises(ContractError):
        f_series(np.zeros((3, 1, 3, 5)), grid, CONTRAST)
    with pytest.raises(ContractError):
        f_series(np.zeros((2, 1, 3, 6)), grid, CONTRAST)


def test_pointwise_f_on_smoothed_curves(random_dataset):
    contrast = ContrastSpec.for_dataset(random_dataset, 0, 1)
    basis = BSplineBasis.uniform(8)
    raw = pointwise_f(random_dataset, contrast)
    np.testing.assert_array_equal(raw.values, f_series(random_dataset.values, random_dataset.grid, contrast).values)
    smooth = pointwise_f(random_dataset, contrast, basis, ridge=1e-6)
    expected = f_series(smoothed_curves(random_dataset, basis, 1e-6), random_dataset.grid, contrast)
    np.testing.assert_allclose(smooth.values, expected.values)


def test_merge_zones():
    grid = TimeGrid.uniform(11)
    assert merge_zones(np.zeros(11, dtype=bool), grid) == []
    assert merge_zones(np.ones(11, dtype=bool), grid) == [(0.0, 1.0)]
    mask = np.zeros(11, dtype=bool)
    mask[[3, 4, 5, 9]] = True
    zones = merge_zones(mask, grid, min_points=2)
    assert len(zones) == 1
    assert zones[0] == pytest.approx((0.3, 0.5))
    assert len(merge_zones(mask, grid)) == 2
    with pytest.raises(ContractError):
        merge_zones(np.ones(5, dtype=bool), grid)


def test_interval_arithmetic():
    assert union_intervals([]) == []
    assert union_intervals([(0.0, 0.5), (0.25, 0.75)]) == [(0.0, 0.75)]
    assert total_length([(0.0, 0.5), (0.25, 0.75), (0.9, 1.0)]) == pytest.approx(0.85)
    assert intersection_length([(0.0, 0.5)], [(0.25, 0.75)]) == pytest.approx(0.25)
    assert intersection_length([(0.0, 0.2)], [(0.3, 0.4)]) == 0.0


def test_classic_test_extremes():
    grid = TimeGrid.uniform(8)
    series = f_series(np.repeat(noise(2, (1, 1, 4, 8)), 2, axis=0), grid, CONTRAST)
    report = classic_test(series, 0.1)
    assert report.zones == ()
    assert report.critical == pytest.approx(f_quantile(1, 7, 0.9))
    assert report.method == "classic"
    assert report.mode is None

    curves, grid = shifted_curves(3, K=4, n_points=8, shift=0.0)
    curves[1] += 10.0
    report = classic_test(f_series(curves, grid, CONTRAST), 0.1)
    assert report.zones == ((0.0, 1.0),)
    assert report.reject_mask.all()
    with pytest.raises(ConfigError):
        classic_test(series, 1.0)


@pytest.mark.slow
def test_classic_test_type_one_error():
    grid = TimeGrid.uniform(20)
    rejected = [
        classic_test(f_series(noise(seed, (2, 1, 10, 20)), grid, CONTRAST), 0.1).reject_mask for seed in range(1000)
    ]
    rate = np.mean(rejected, axis=0)
    assert rate.shape == (20,)
    assert 0.05 <= rate.min() and rate.max() <= 0.15


@pytest.mark.slow
def test_permutation_test_null_calibration():
    grid = TimeGrid.uniform(20)
    rejected = [
        bool(permutation_test_curves(noise(1000 + run, (2, 1, 5, 20)), grid, CONTRAST, 100, 0.1, run).zones)
        for run in range(400)
    ]
    assert np.mean(rejected) == pytest.approx(0.1, abs=0.05)


def test_permutation_test_is_deterministic():
    curves, grid = shifted_curves(4, K=6, n_points=30, shift=0.2, sd=0.3)
    first = permutation_test_curves(curves, grid, CONTRAST, 200, 0.1, 7)
    second = permutation_test_curves(curves, grid, CONTRAST, 200, 0.1, 7)
    assert jsonable(first.to_dict()) == jsonable(second.to_dict())
    assert not first.exhaustive
    assert first.n_replicates == 200
    assert first.null_distribution.shape == (200,)


def test_monte_carlo_splits_are_distinct():
    splits = permutation_splits(1, 5, 200)
    assert splits.shape == (200, 5)
    assert len({tuple(row) for row in splits.tolist()}) == 200
    assert np.all(np.diff(splits, axis=1) > 0)
    np.testing.assert_array_equal(splits, permutation_splits(1, 5, 200))
    assert len({tuple(row) for row in permutation_splits(2, 3, 20).tolist()}) == 20
    with pytest.raises(ConfigError):
        permutation_splits(0, 3, 21)


def test_permutation_test_recovers_shifted_zone():
    curves, grid = shifted_curves(5)
    report = permutation_test_curves(curves, grid, CONTRAST, 1000, 0.1, 0)
    assert report.exhaustive
    assert report.n_replicates == 924
    assert any(start <= 0.32 and stop >= 0.48 for start, stop in report.zones)


def test_permutation_test_does_not_depend_on_workers():
    curves, grid = shifted_curves(6, K=8, n_points=20, shift=0.5, sd=0.5)
    serial = permutation_test_curves(curves, grid, CONTRAST, 300, 0.1, 3)
    parallel = permutation_test_curves(curves, grid, CONTRAST, 300, 0.1, 3, n_jobs=2)
    np.testing.assert_array_equal(serial.null_distribution, parallel.null_distribution)
    assert serial.critical == parallel.critical


def test_permutation_null_is_symmetric_in_the_control():
    curves, grid = shifted_curves(7, K=8, n_points=20, shift=0.5, sd=0.5)
    swapped = curves[::-1].copy()
    first = permutation_test_curves(curves, grid, CONTRAST, 300, 0.1, 11)
    second = permutation_test_curves(swapped, grid, CONTRAST, 300, 0.1, 11)
    np.testing.assert_allclose(first.null_distribution, second.null_distribution, rtol=1e-10)


def test_small_samples_are_enumerated_with_resolution_warning(caplog):
    caplog.set_level(logging.WARNING, logger="funcpattern")
    curves, grid = shifted_curves(8, K=3, n_points=10)
    report = permutation_test_curves(curves, grid, CONTRAST, 100, 0.1, 0)
    assert report.exhaustive
    assert report.n_replicates == 20
    assert report.resolution_warning
    assert "tail draws" in caplog.text


def test_pointwise_permutation_mode():
    curves, grid = shifted_curves(9, K=6, n_points=25, shift=1.0, sd=0.2)
    report = permutation_test_curves(curves, grid, CONTRAST, 200, 0.1, 1, mode="pointwise")
    assert report.critical is None
    assert report.critical_curve.shape == (25,)
    assert report.null_distribution.shape == (200, 25)
    np.testing.assert_array_equal(report.critical_values(), report.critical_curve)
    np.testing.assert_array_equal(report.reject_mask, report.series.values > report.critical_curve)


def test_permutation_configuration_errors():
    curves, grid = shifted_curves(10, K=4, n_points=10)
    with pytest.raises(ConfigError):
        permutation_test_curves(curves, grid, CONTRAST, 99, 0.1, 0)
    with pytest.raises(ConfigError):
        permutation_test_curves(curves, grid, CONTRAST, 100, 0.0, 0)
    with pytest.raises(ConfigError):
        permutation_test_curves(curves, grid, CONTRAST, 100, 0.1, 0, mode="max")


def test_permutation_test_on_dataset():
    curves, _ = shifted_curves(12, K=5, n_points=30, shift=2.0, sd=0.1)
    dataset = make_dataset(curves)
    contrast = ContrastSpec.for_dataset(dataset, 0, 1)
    report = permutation_test(dataset, contrast, 300, 0.1, 2, basis=BSplineBasis.uniform(12), ridge=1e-6)
    assert report.method == "permutation"
    assert report.mode == "sup"
    assert report.zones
    assert report.contrast == contrast


def test_report_serialization_keeps_infinities():
    curves = np.zeros((2, 1, 3, 5))
    curves[1, 0, :, 2] = 1.0
    curves[:, 0, 0, 4] = [0.1, -0.2]
    report = classic_test(f_series(curves, TimeGrid.uniform(5), CONTRAST), 0.1)
    restored = TestReport.from_dict(jsonable(report.to_dict()))
    assert np.isinf(restored.series.values[2])
    assert restored.zones == report.zones
    assert restored.critical == report.critical
    assert restored.rows() == report.rows()
    assert report.columns() == ["t", "F", "critical", "reject"]


def test_permutation_cdf():
    null = np.array([3.0, 1.0, 2.0, 2.0])
    assert permutation_cdf(null, [0.5, 2.0, 3.0]).tolist() == [0.0, 0.75, 1.0]
    values = permutation_cdf(noise(13, 50), np.linspace(-3, 3, 40))
    assert np.all(np.diff(values) >= 0)
