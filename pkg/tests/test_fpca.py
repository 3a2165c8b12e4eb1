import logging

import numpy as np
import pytest

from funcpattern.basis import BSplineBasis, evaluate_coefficients, gram_matrix, smooth_curves, smooth_dataset
from funcpattern.exceptions import ContractError, SelectionError
from funcpattern.fpca import EigenSystem, covariance_eigen, kl_truncate, mean_function, multivariate_rows, scores
from funcpattern.funcdata import TimeGrid


@pytest.fixture
def basis():
    return BSplineBasis.uniform(8)


@pytest.fixture
def gram(basis):
    return gram_matrix(basis)


@pytest.fixture
def random_rows():
    return np.random.default_rng(7).normal(size=(20, 8))


def test_mean_of_opposite_rows_is_zero():
    a = np.arange(1.0, 6.0)
    assert np.all(mean_function(np.vstack([a, -a])) == 0.0)


def test_mean_of_identical_rows():
    a = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(mean_function(np.tile(a, (6, 1))), a)


def test_mean_of_noisy_sines():
    grid = TimeGrid.uniform(110)
    basis = BSplineBasis.uniform(20)
    noise = 0.2
    truth = np.sin(2.0 * np.pi * grid.points)
    noisy = truth + np.random.default_rng(1).normal(scale=noise, size=(10, 110))
    mean = evaluate_coefficients(mean_function(smooth_curves(noisy, grid, basis, ridge=1e-6)), basis, grid.points)
    assert np.sqrt(np.mean((mean - truth) ** 2)) <= noise / np.sqrt(10) * 1.5


def test_mean_selection(random_dataset, basis):
    coefficients = smooth_dataset(random_dataset, basis, ridge=1e-6)
    expected = coefficients.coefficients[2, 1].mean(axis=0)
    np.testing.assert_allclose(mean_function(coefficients, group="g2", variate=1), expected)
    with pytest.raises(SelectionError):
        mean_function(np.empty((0, 8)))


def test_two_sample_eigen_closed_form(gram):
    c = np.linspace(-1.0, 1.0, 8)
    e1 = np.eye(8)[0]
    eps = 0.3
    system = covariance_eigen(np.vstack([c + eps * e1, c - eps * e1]), gram)
    J = gram.entries
    assert system.eigenvalues[0] == pytest.approx(2.0 * eps**2 * J[0, 0], rel=1e-9)
    assert np.all(system.eigenvalues[1:] <= 1e-12 * system.eigenvalues[0])
    assert system.null_mask.tolist() == [False] + [True] * 7
    leading = system.eigen_coefficients[0] * np.sign(system.eigen_coefficients[0, 0])
    np.testing.assert_allclose(leading, e1 / np.sqrt(J[0, 0]), atol=1e-6)


def test_identical_rows_have_zero_spectrum(gram, caplog):
    caplog.set_level(logging.WARNING, logger="funcpattern")
    system = covariance_eigen(np.tile(np.arange(8.0), (5, 1)), gram)
    assert np.all(system.eigenvalues == 0.0)
    assert system.null_mask.all()
    assert "numerically zero" in caplog.text


def test_trace_equals_weighted_variance(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    deviations = random_rows - random_rows.mean(axis=0)
    total = np.einsum("ij,jk,ik->", deviations, gram.entries, deviations) / (len(random_rows) - 1)
    assert system.eigenvalues.sum() == pytest.approx(total, abs=1e-8)
    assert np.all(np.diff(system.eigenvalues) <= 0)
    assert system.n_samples == 20
    assert system.centered


def test_uncentered_covariance_divides_by_n(random_rows, gram):
    system = covariance_eigen(random_rows, gram, center=False)
    total = np.einsum("ij,jk,ik->", random_rows, gram.entries, random_rows) / len(random_rows)
    assert system.eigenvalues.sum() == pytest.approx(total, abs=1e-8)


def test_eigenfunctions_are_orthonormal(random_rows, gram):
    F = covariance_eigen(random_rows, gram).eigen_coefficients
    np.testing.assert_allclose(F @ gram.entries @ F.T, np.eye(8), atol=1e-8)


def test_covariance_errors(gram):
    with pytest.raises(SelectionError):
        covariance_eigen(np.ones((1, 8)), gram)
    with pytest.raises(ContractError):
        covariance_eigen(np.ones((3, 5)), gram)


def test_truncation_at_mean(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    mean = random_rows.mean(axis=0)
    values, reconstruction = kl_truncate(mean, mean, system, 3)
    np.testing.assert_allclose(values, 0.0, atol=1e-12)
    np.testing.assert_allclose(reconstruction, mean, atol=1e-12)


def test_truncation_along_leading_direction(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    mean = random_rows.mean(axis=0)
    values, _ = kl_truncate(mean + 1.5 * system.eigen_coefficients[0], mean, system, 4)
    np.testing.assert_allclose(values, [1.5, 0.0, 0.0, 0.0], atol=1e-8)


def test_full_truncation_reconstructs_sample(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    mean = random_rows.mean(axis=0)
    _, reconstruction = kl_truncate(random_rows[3], mean, system, system.n_components)
    np.testing.assert_allclose(reconstruction, random_rows[3], atol=1e-8)
    with pytest.raises(ContractError):
        kl_truncate(random_rows[3], mean, system, 0)
    with pytest.raises(ContractError):
        kl_truncate(random_rows[3, :5], mean[:5], system, 2)


def test_scores_of_centered_rows(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    table = scores(random_rows, random_rows.mean(axis=0), system)
    assert table.shape == (20, 8)
    np.testing.assert_allclose(table.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(table.var(axis=0, ddof=1), system.eigenvalues, rtol=1e-8, atol=1e-10)


def test_multivariate_rows(random_dataset, basis, gram):
    coefficients = smooth_dataset(random_dataset, basis, ridge=1e-6)
    stacked = multivariate_rows(coefficients, gram)
    assert stacked.rows.shape == (12, 16)
    assert stacked.gram.shape == (16, 16)
    np.testing.assert_allclose(stacked.rows[0, 8:], coefficients.coefficients[0, 1, 0])
    assert np.all(stacked.gram[:8, 8:] == 0.0)
    assert multivariate_rows(coefficients, gram, group="g1").rows.shape == (4, 16)
    with pytest.raises(SelectionError):
        multivariate_rows(coefficients, gram, group=5)
    with pytest.raises(ContractError):
        multivariate_rows(coefficients, gram_matrix(BSplineBasis.uniform(6)))


def test_eigen_system_serialization(random_rows, gram):
    system = covariance_eigen(random_rows, gram)
    restored = EigenSystem.from_dict(system.to_dict())
    np.testing.assert_array_equal(restored.eigenvalues, system.eigenvalues)
    np.testing.assert_array_equal(restored.null_mask, system.null_mask)
    assert restored.n_samples == system.n_samples
