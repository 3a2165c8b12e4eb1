import logging
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from funcpattern.basis import BSplineBasis, evaluate_coefficients
from funcpattern.exceptions import ConfigError, ContractError
from funcpattern.fanova import FanovaKernels, FanovaModel
from funcpattern.funcdata import CurveSample, TimeGrid
from funcpattern.kernelclass import (
    ClassifierModel,
    CombinationWeights,
    KernelSet,
    PegasosTrainer,
    build_kernel_set,
    centralize,
    centralize_curves,
    combine_scores,
    interval_weights,
    normalize_scores,
    predict,
    project_simplex,
    score,
    score_curves,
    score_table,
    train_classifier,
    train_weights,
)


def kernel_set(kernels, intervals, grid, weights=None):
    D, n_groups = kernels.shape[:2]
    return KernelSet(
        grid,
        np.asarray(kernels, dtype=float),
        intervals,
        np.ones((D, n_groups)) if weights is None else weights,
        tuple(f"g{g}" for g in range(n_groups)),
        tuple(f"v{d}" for d in range(D)),
    )


def bump(t, start=0.3, stop=0.5):
    centre, half = (start + stop) / 2.0, (stop - start) / 2.0
    return np.where(np.abs(t - centre) < half, np.cos(np.pi * (t - centre) / (2.0 * half)) ** 2, 0.0)


@pytest.fixture
def model():
    basis = BSplineBasis.uniform(6)
    B = np.random.default_rng(0).normal(size=(2 * 3, 6))
    return FanovaModel(B, basis, ("c", "t"), ("v0", "v1"))


def separable_scores(n_per_class=20, seed=0):
    generator = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    centres = np.eye(2)[labels]
    return centres + generator.normal(scale=0.05, size=centres.shape), labels


def test_centralize_mean_curve_is_zero(model):
    grid = TimeGrid.uniform(15)
    mean = evaluate_coefficients(model.grand_means()[1], model.basis, grid.points)
    sample = CurveSample("u0", "t", "v1", mean, grid)
    np.testing.assert_allclose(centralize(sample, model), 0.0, atol=1e-12)
    with pytest.raises(ContractError):
        centralize(CurveSample("u0", "t", "v9", mean, grid), model)


def test_centralize_is_affine():
    generator = np.random.default_rng(1)
    mu = generator.normal(size=(2, 9))
    y1, y2 = generator.normal(size=(2, 2, 3, 9))
    np.testing.assert_allclose(
        centralize_curves(y1 + y2, mu), centralize_curves(y1, mu) + centralize_curves(y2, mu) + mu[:, None, :]
    )


def test_centralize_matches_hand_subtraction():
    mu = np.array([[0.0, 1.0, 2.0, 1.0, 0.0]])
    curves = np.array([[[1.0, 1.0, 1.0, 1.0, 1.0], [0.5, 2.0, 3.5, -1.0, 0.0]]])
    expected = [[[1.0, 0.0, -1.0, 0.0, 1.0], [0.5, 1.0, 1.5, -2.0, 0.0]]]
    assert centralize_curves(curves, mu).tolist() == expected
    with pytest.raises(ContractError):
        centralize_curves(curves, np.zeros((2, 5)))


def test_interval_weights():
    grid = TimeGrid.uniform(37)
    q = interval_weights(grid, [(0.1, 0.35)])
    assert q.sum() == pytest.approx(0.25)
    assert q @ grid.points == pytest.approx((0.35**2 - 0.1**2) / 2.0)
    assert np.all(interval_weights(grid, []) == 0.0)
    np.testing.assert_allclose(interval_weights(grid, [(0.0, 1.0)]), trapezoid(np.eye(37), grid.points, axis=1))
    with pytest.raises(ContractError):
        interval_weights(grid, [(0.5, 1.5)])


def test_score_of_zero_curve():
    grid = TimeGrid.uniform(21)
    kernels = kernel_set(bump(grid.points)[None, None], (((0.0, 1.0),),), grid)
    assert score(np.zeros(21), kernels, 0, 0) == 0.0


def test_score_of_kernel_against_itself():
    grid = TimeGrid.uniform(41)
    alpha = bump(grid.points, 0.2, 0.6) - 0.1
    kernels = kernel_set(alpha[None, None], (((0.0, 1.0),),), grid)
    assert score(alpha, kernels, "g0", "v0") == pytest.approx(trapezoid(alpha**2, grid.points))
    assert score(alpha, kernels, 0, 0) > 0


def test_empty_interval_scores_zero():
    grid = TimeGrid.uniform(21)
    kernels = kernel_set(np.ones((1, 1, 21)), (((),),), grid)
    assert score(np.ones(21), kernels, 0, 0) == 0.0


def test_score_matches_dense_quadrature():
    grid = TimeGrid.uniform(37)
    curve = np.interp(grid.points, [0.0, 0.4, 1.0], [1.0, -0.5, 2.0])
    alpha = bump(grid.points)
    kernels = kernel_set(alpha[None, None], (((0.3, 0.5),),), grid)
    dense = np.linspace(0.3, 0.5, 100_001)
    oracle = trapezoid(np.interp(dense, grid.points, curve * alpha), dense)
    assert score(curve, kernels, 0, 0) == pytest.approx(oracle, rel=1e-6)


def test_score_curves_agree_with_single_scores():
    grid = TimeGrid.uniform(25)
    generator = np.random.default_rng(2)
    alpha = generator.normal(size=(2, 3, 25))
    intervals = (((0.1, 0.4),), ((0.0, 1.0),), ()), (((0.5, 0.9),), (), ((0.2, 0.3), (0.6, 0.7)))
    kernels = kernel_set(alpha, intervals, grid, weights=generator.uniform(0.5, 2.0, size=(2, 3)))
    centered = generator.normal(size=(2, 4, 25))
    raw = score_curves(centered, kernels)
    assert raw.shape == (4, 3, 2)
    for k in range(4):
        for g in range(3):
            for d in range(2):
                assert raw[k, g, d] == pytest.approx(score(centered[d, k], kernels, g, d), abs=1e-12)
    with pytest.raises(ContractError):
        score_curves(centered[:, :, :20], kernels)
    with pytest.raises(ContractError):
        score(centered[0, 0], kernels, "g7", 0)


def test_kernel_set_validation():
    grid = TimeGrid.uniform(5)
    with pytest.raises(ContractError):
        kernel_set(np.zeros((1, 2, 4)), (((), ()),), grid)
    with pytest.raises(ContractError):
        kernel_set(np.zeros((1, 2, 5)), (((), ()),), grid, weights=np.zeros((1, 2)))
    with pytest.raises(ContractError):
        kernel_set(np.zeros((1, 2, 5)), (((),),), grid)


def test_kernel_set_serialization():
    grid = TimeGrid.uniform(5)
    kernels = kernel_set(np.arange(10.0).reshape(1, 2, 5), ((((0.25, 0.5),), ()),), grid)
    restored = KernelSet.from_dict(kernels.to_dict())
    assert restored.intervals == kernels.intervals
    np.testing.assert_array_equal(restored.kernels, kernels.kernels)
    assert restored.grid == grid


def test_build_kernel_set_intervals_and_weights():
    grid = TimeGrid.uniform(11)
    fitted = FanovaKernels(grid, np.zeros((2, 11)), np.ones((2, 3, 11)), ("c", "a", "b"), ("v0", "v1"))
    reports = {
        (0, 1): SimpleNamespace(zones=((0.1, 0.3),)),
        (0, 2): SimpleNamespace(zones=((0.2, 0.5),)),
        (1, 1): SimpleNamespace(zones=()),
    }
    kernels = build_kernel_set(fitted, reports)
    assert kernels.intervals[0] == (((0.1, 0.5),), ((0.1, 0.3),), ((0.2, 0.5),))
    assert kernels.intervals[1] == ((), (), ())
    np.testing.assert_allclose(kernels.weights, [[1 / 0.4, 1 / 0.2, 1 / 0.3], [1.0, 1.0, 1.0]])

    union = build_kernel_set(fitted, reports, weight_mode="unit", interval_mode="union")
    assert all(cell == ((0.1, 0.5),) for row in union.intervals for cell in row)
    assert np.all(union.weights == 1.0)
    with pytest.raises(ConfigError):
        build_kernel_set(fitted, reports, weight_mode="length")
    with pytest.raises(ConfigError):
        build_kernel_set(fitted, reports, interval_mode="all")


def test_normalize_scores(caplog):
    caplog.set_level(logging.WARNING, logger="funcpattern")
    assert normalize_scores(np.array([2.0, 1.0, 1.0])).values.tolist() == [0.5, 0.25, 0.25]
    assert normalize_scores(np.array([-1.0, 0.0])).values.tolist() == [0.0, 1.0]
    np.testing.assert_allclose(normalize_scores(np.full(4, 3.5)).values, 0.25)
    zero = normalize_scores(np.zeros(3))
    np.testing.assert_allclose(zero.values, 1 / 3)
    assert bool(zero.degenerate)
    assert "degenerate" in caplog.text
    partial = normalize_scores(np.array([1.0, np.nan, 3.0]))
    assert partial.values.tolist() == [0.25, 0.0, 0.75]


def test_normalize_scores_along_axis():
    raw = np.random.default_rng(3).normal(size=(5, 3, 2))
    result = normalize_scores(raw, axis=1)
    np.testing.assert_allclose(result.values.sum(axis=1), 1.0)
    assert np.all(result.values >= 0.0)
    assert result.degenerate.shape == (5, 2)


def test_project_simplex():
    generator = np.random.default_rng(4)
    for _ in range(20):
        v = generator.normal(scale=2.0, size=5)
        w = project_simplex(v)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(w >= 0.0)
        for _ in range(20):
            other = generator.dirichlet(np.ones(5))
            assert np.sum((v - w) ** 2) <= np.sum((v - other) ** 2) + 1e-12
    point = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(project_simplex(point), point)


def test_combine_scores():
    weights = CombinationWeights(np.array([[0.25, 0.5], [0.75, 0.5]]))
    assert combine_scores(np.ones((2, 2)), weights).tolist() == [1.0, 1.0]
    normalized = np.array([[0.8, 0.4], [0.3, 0.7]])
    assert combine_scores(normalized, weights, g=0) == pytest.approx(0.25 * 0.8 + 0.75 * 0.4)
    vertex = CombinationWeights(np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert combine_scores(normalized, vertex).tolist() == [0.4, 0.7]
    with pytest.raises(ContractError):
        combine_scores(np.ones((3, 2)), weights)


def test_combination_weights_validation():
    with pytest.raises(ContractError):
        CombinationWeights(np.array([[0.5, 0.5], [0.6, 0.5]]))
    with pytest.raises(ContractError):
        CombinationWeights(np.array([1.0, 0.0]))
    restored = CombinationWeights.from_dict(CombinationWeights.uniform(4, 2, variate_labels=tuple("abcd")).to_dict())
    np.testing.assert_allclose(restored.values, 0.25)
    assert restored.variate_labels == ("a", "b", "c", "d")
    assert restored.D == 4


def separable_normalized(n_per_class=15, seed=5):
    """Variate 0 points at the true group; variate 1 is uniform noise."""
    generator = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    normalized = np.empty((labels.size, 2, 2))
    normalized[:, :, 0] = np.where(np.eye(2)[labels] == 1, 0.9, 0.1)
    noise = generator.uniform(size=labels.size)
    normalized[:, 0, 1], normalized[:, 1, 1] = noise, 1.0 - noise
    return normalized, labels


def test_single_variate_weights_are_fixed():
    normalized = np.random.default_rng(6).uniform(size=(6, 3, 1))
    weights = train_weights(normalized, [0, 1, 2, 0, 1, 2])
    assert weights.values.tolist() == [[1.0, 1.0, 1.0]]


def test_trained_weights_favour_the_informative_variate():
    normalized, labels = separable_normalized()
    weights = train_weights(normalized, labels, epochs=200)
    assert np.all(weights.values[0] >= 0.9)
    np.testing.assert_allclose(weights.values.sum(axis=0), 1.0)


def test_weight_training_is_deterministic():
    normalized, labels = separable_normalized(seed=8)
    first = train_weights(normalized, labels, epochs=50, seed=3, batch_size=7)
    second = train_weights(normalized, labels, epochs=50, seed=3, batch_size=7)
    np.testing.assert_array_equal(first.values, second.values)


def test_weight_training_needs_every_group():
    normalized, _ = separable_normalized()
    with pytest.raises(ContractError):
        train_weights(normalized, np.zeros(30, dtype=int))
    with pytest.raises(ContractError):
        train_weights(normalized, np.zeros(5, dtype=int))


def test_separable_training_accuracy():
    features, labels = separable_scores()
    model = train_classifier(features, labels, classes=("a", "b"))
    assert predict(model, features) == [model.classes[i] for i in labels]
    assert predict(model, np.eye(2)) == ["a", "b"]


def test_heavy_regularization_shrinks_weights():
    features, labels = separable_scores()
    model = train_classifier(features, labels, lam=1e6, epochs=50)
    assert np.linalg.norm(model.weights, axis=1).max() <= 1e-3 + 1e-12


def test_duplicated_training_set_gives_same_classifier():
    features, labels = separable_scores(seed=1)
    once = train_classifier(features, labels, epochs=100)
    twice = train_classifier(np.vstack([features, features]), np.r_[labels, labels], epochs=100)
    points = np.random.default_rng(2).uniform(size=(10, 2))
    np.testing.assert_allclose(once.decision_function(points), twice.decision_function(points), atol=1e-9)


def test_prediction_shift_invariance_and_ties():
    weights = np.array([[1.0, -1.0, 0.2], [-0.5, 1.0, 0.0], [0.3, 0.3, 0.1]])
    model = ClassifierModel(weights, ("x", "y", "z"), 0.01, 10, 0)
    features = np.random.default_rng(3).normal(size=(12, 2))
    shifted = ClassifierModel(weights + np.array([0.0, 0.0, 5.0]), model.classes, 0.01, 10, 0)
    assert predict(shifted, features) == predict(model, features)
    tied = ClassifierModel(np.zeros((3, 3)), model.classes, 0.01, 10, 0)
    assert predict(tied, features) == ["x"] * 12


def test_classifier_with_string_labels_and_errors():
    features, labels = separable_scores()
    names = np.array(["sad", "angry"])[labels]
    model = train_classifier(features, names)
    assert model.classes == ("angry", "sad")
    assert predict(model, features) == names.tolist()
    with pytest.raises(ContractError):
        train_classifier(features, np.zeros(40, dtype=int))
    with pytest.raises(ContractError):
        train_classifier(features, labels[:10])
    with pytest.raises(ContractError):
        train_classifier(features, names, classes=("sad", "happy"))
    with pytest.raises(ConfigError):
        PegasosTrainer(lam=0.0)
    with pytest.raises(ContractError):
        model.decision_function(np.ones((2, 3)))


def test_integer_labels_without_classes_are_names():
    features, labels = separable_scores()
    codes = np.array([3, 5])[labels]
    model = train_classifier(features, codes)
    assert model.classes == ("3", "5")
    assert predict(model, features) == [str(c) for c in codes.tolist()]


def test_integer_labels_index_given_classes():
    features, labels = separable_scores()
    model = train_classifier(features, labels, classes=("b", "a"))
    assert predict(model, features) == [("b", "a")[i] for i in labels]
    with pytest.raises(ContractError):
        train_classifier(features, labels + 3, classes=("a", "b"))
    with pytest.raises(ContractError):
        train_classifier(features, np.where(labels == 0, "a", "c"), classes=("a", "b"))


def test_classifier_serialization():
    features, labels = separable_scores()
    model = train_classifier(features, labels, epochs=20, batch_size=8, seed=4)
    restored = ClassifierModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(restored.weights, model.weights)
    assert (restored.classes, restored.lam, restored.epochs, restored.seed) == (model.classes, 0.01, 20, 4)


def test_score_table():
    grid = TimeGrid.uniform(11)
    generator = np.random.default_rng(9)
    kernels = kernel_set(generator.normal(size=(2, 2, 11)), ((((0.0, 1.0),),) * 2,) * 2, grid)
    table = score_table(generator.normal(size=(2, 3, 11)), kernels, None, ["a", "b", "c"])
    assert table.raw.shape == table.normalized.shape == (3, 2, 2)
    assert table.combined.shape == (3, 2)
    np.testing.assert_allclose(table.combined, table.normalized.mean(axis=2))
    assert len(table.rows()) == 3 * 2 * 2
    assert table.columns() == ["unit", "group", "variate", "raw", "normalized", "combined"]
    assert table.rows()[0][:3] == ["a", "g0", "v0"]
