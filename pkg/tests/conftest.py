import numpy as np
import pytest

from omniplace.model import FeatureMatrix, ModalityLayout, ScenarioLabels


def two_by_two(dims=((2, 3), (1, 2))):
    return ModalityLayout.from_spec(
        [(f"s{q}", [(f"f{k}", d) for k, d in enumerate(ds)]) for q, ds in enumerate(dims)]
    )


def random_problem(seed, dims=((2, 3), (1, 2)), n=12, c=3):
    rng = np.random.default_rng(seed)
    layout = two_by_two(dims)
    A = FeatureMatrix(layout, rng.standard_normal((layout.total_dim, n)), [f"i{j}" for j in range(n)])
    labels = np.arange(n) % c
    rng.shuffle(labels)
    B = ScenarioLabels.from_assignments(labels, [f"sc{j}" for j in range(c)])
    return A, B


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
