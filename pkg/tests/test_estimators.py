import numpy as np
import pytest
from scipy.stats import multivariate_normal
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sogmm import MeanShiftModes, SOGMM
from sogmm.core import EmConfig, MeanShiftConfig, depth_to_pointcloud
from sogmm.fit import fit_sogmm
from sogmm.io import model_to_bytes
from sogmm.regress import expected_intensity

from conftest import random_model


def test_params_round_trip():
    est = SOGMM(bandwidth=0.03, kernel="gaussian", random_state=5)
    params = est.get_params()
    assert params["bandwidth"] == 0.03 and params["kernel"] == "gaussian"
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(bandwidth=0.05)
    assert twin.bandwidth == 0.05 and est.bandwidth == 0.03
    assert clone(MeanShiftModes(bandwidth=0.2)).bandwidth == 0.2


def test_mean_shift_modes_fit_predict(rng):
    x = np.vstack([rng.normal(size=(100, 2)) * 0.1, rng.normal(size=(100, 2)) * 0.1 + 3])
    est = MeanShiftModes(bandwidth=1.0).fit(x)
    assert est.n_modes_ == 2
    assert est.cluster_centers_.shape == (2, 2)
    np.testing.assert_array_equal(est.predict(x), est.labels_)
    labels = est.fit_predict(x)
    assert len(set(labels[:100])) == 1 and labels[0] != labels[-1]


def test_fit_image_matches_functional_pipeline(two_plane_scene, intrinsics):
    est = SOGMM(bandwidth=0.02, random_state=2).fit_image(two_plane_scene, intrinsics)
    model = fit_sogmm(two_plane_scene, intrinsics, MeanShiftConfig(bandwidth=0.02),
                      EmConfig(rng_seed=2))
    assert model_to_bytes(est.model_, 0.02) == model_to_bytes(model, 0.02)
    assert est.n_components_ == model.n_components
    assert est.log_likelihoods_[-1] >= est.log_likelihoods_[0]


def test_fit_on_cloud(two_plane_scene, intrinsics):
    cloud = depth_to_pointcloud(two_plane_scene, intrinsics)
    est = SOGMM(bandwidth=0.02).fit(cloud)
    assert est.n_components_ >= 2
    g = est.predict(cloud[:, :3])
    assert g.shape == (len(cloud),) and np.all((g >= 0) & (g <= 1))
    assert np.isfinite(est.score(cloud))


def test_score_samples_matches_scipy(rng):
    model = random_model(rng, m=3)
    est = SOGMM.from_model(model)
    x = rng.normal(size=(10, 4))
    expect = np.log(sum(w * multivariate_normal(mu, cov).pdf(x)
                        for w, mu, cov in zip(model.weights, model.means, model.covariances)))
    np.testing.assert_allclose(est.score_samples(x), expect, rtol=1e-10)


def test_predict_and_sampling_delegate(rng):
    model = random_model(rng, m=2)
    est = SOGMM.from_model(model, random_state=3)
    x = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(est.predict(x), expected_intensity(model, x))
    assert est.sample(20).shape == (20, 4)
    np.testing.assert_array_equal(est.reconstruct(20), est.reconstruct(20, random_state=3))


def test_unfitted_and_bad_shapes(rng):
    with pytest.raises(NotFittedError):
        SOGMM().predict(np.zeros((1, 3)))
    with pytest.raises(NotFittedError):
        MeanShiftModes().predict(np.zeros((1, 2)))
    est = SOGMM.from_model(random_model(rng))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        est.score_samples(np.zeros((2, 3)))
