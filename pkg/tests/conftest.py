import numpy as np
import pytest

from sogmm.core import Gmm4
from sogmm.datasets import make_plane_scene, make_two_plane_scene, synthetic_intrinsics


def random_spd(rng, d=4, scale=1.0, jitter=0.05):
    a = rng.normal(size=(d, d)) * scale
    return a @ a.T + jitter * np.eye(d)


def random_model(rng, m=3, spread=1.0, cov_scale=0.3):
    weights = rng.dirichlet(np.full(m, 2.0))
    means = rng.normal(scale=spread, size=(m, 4))
    means[:, 3] = rng.uniform(0.2, 0.8, size=m)
    covs = np.array([random_spd(rng, scale=cov_scale) for _ in range(m)])
    return Gmm4(weights, means, covs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def intrinsics():
    return synthetic_intrinsics()


@pytest.fixture(scope="session")
def plane_scene():
    return make_plane_scene()


@pytest.fixture(scope="session")
def two_plane_scene():
    return make_two_plane_scene()
