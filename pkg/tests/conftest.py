import numpy as np
import pytest

from funcpattern.funcdata import FunctionalDataset, TimeGrid
from funcpattern.simulate import SimulationConfig, gen_dataset


def make_dataset(values, groups=None, variates=None):
    """Wrap a ``(G+1, D, K, n)`` array into a dataset on a uniform grid."""
    values = np.asarray(values, dtype=float)
    n_groups, n_variates, n_units, n_points = values.shape
    groups = groups or tuple(f"g{g}" for g in range(n_groups))
    variates = variates or tuple(f"v{d}" for d in range(n_variates))
    units = tuple(f"u{k}" for k in range(n_units))
    return FunctionalDataset(TimeGrid.uniform(n_points), values, tuple(groups), tuple(variates), (units,) * n_groups)


def write_series(path, header, rows):
    """Write a small CSV recording."""
    lines = [",".join(header)] + [",".join(str(value) for value in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def random_dataset():
    """G=2, D=2, K=4 dataset of random curves on 21 points."""
    generator = np.random.default_rng(12345)
    return make_dataset(generator.normal(size=(3, 2, 4, 21)))


@pytest.fixture(scope="module")
def simulated():
    """Low-noise simulated dataset with its ground truth."""
    return gen_dataset(SimulationConfig(G=2, D=2, K=8, n_points=60, sigma=0.05, seed=11))
