import numpy as np
import pytest
from scipy import stats

from funcpattern.exceptions import ContractError
from funcpattern.fdist import f_cdf, f_quantile


def test_median_of_f_one_one():
    assert f_quantile(1, 1, 0.5) == pytest.approx(1.0, abs=1e-12)
    assert f_cdf(1.0, 1, 1) == pytest.approx(0.5, abs=1e-12)


def test_known_critical_value():
    assert f_quantile(1, 60, 0.95) == pytest.approx(4.0012, abs=5e-5)


@pytest.mark.parametrize("d1,d2", [(1, 1), (1, 10), (2, 60), (5, 120), (30, 3)])
def test_quantile_inverts_cdf(d1, d2):
    for p in (1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999):
        x = f_quantile(d1, d2, p)
        assert f_cdf(x, d1, d2) == pytest.approx(p, rel=1e-9)
        assert x == pytest.approx(stats.f.ppf(p, d1, d2), rel=1e-8)


def test_quantile_is_monotone_in_probability():
    probabilities = np.linspace(0.01, 0.99, 50)
    quantiles = [f_quantile(3, 40, p) for p in probabilities]
    assert all(b > a for a, b in zip(quantiles, quantiles[1:]))


def test_cdf_edges():
    assert f_cdf(0.0, 2, 3) == 0.0
    assert f_cdf(-1.0, 2, 3) == 0.0
    assert f_cdf(float("inf"), 2, 3) == 1.0


@pytest.mark.parametrize("args", [(0, 5, 0.5), (5, 0.5, 0.5), (1, 1, 0.0), (1, 1, 1.0), (1, float("inf"), 0.5)])
def test_invalid_arguments(args):
    with pytest.raises(ContractError):
        f_quantile(*args)


@pytest.mark.slow
@pytest.mark.parametrize("d2", [10, 60, 120])
def test_critical_value_matches_monte_carlo(d2):
    critical = f_quantile(1, d2, 0.95)
    generator = np.random.default_rng(d2)
    below = 0
    for _ in range(10):
        draws = generator.chisquare(1, 1_000_000) / (generator.chisquare(d2, 1_000_000) / d2)
        below += int(np.count_nonzero(draws <= critical))
    assert below / 10_000_000 == pytest.approx(0.95, abs=5e-4)
