import numpy as np
import pytest

from sogmm.core import EmConfig, Gmm4, MeanShiftConfig, depth_to_pointcloud
from sogmm.exceptions import ParameterError
from sogmm.fit import fit_sogmm
from sogmm.metrics import mean_reconstruction_error
from sogmm.recon import reconstruct, sample_gmm, sqrt_covariances

from conftest import random_model, random_spd


def test_sqrt_covariances_squares_back(rng):
    covs = np.array([random_spd(rng) for _ in range(3)])
    r = sqrt_covariances(covs)
    np.testing.assert_allclose(r @ r, covs, atol=1e-12)


def test_sample_mean(rng):
    model = random_model(rng, m=3, cov_scale=0.05)
    n = 100_000
    pts = sample_gmm(model, n, seed=7)
    mean = model.weights @ model.means
    diff = model.means - mean
    total_cov = np.einsum("k,kij->ij", model.weights, model.covariances) + \
        (model.weights[:, None] * diff).T @ diff
    se = np.sqrt(np.diag(total_cov) / n)
    # gray is clamped, so only the spatial channels are tested
    assert np.all(np.abs(pts[:, :3].mean(axis=0) - mean[:3]) < 4 * se[:3])


def test_zero_weight_component_is_never_drawn():
    cov = np.eye(4) * 0.01
    model = Gmm4(np.array([1.0, 0.0]), np.array([[0.0, 0, 0, 0.5], [10.0, 0, 0, 0.5]]),
                 np.stack([cov, cov]), check=False)
    _, labels = sample_gmm(model, 5000, seed=1, return_labels=True)
    assert np.all(labels == 0)


def test_label_frequencies(rng):
    model = random_model(rng, m=4)
    n = 100_000
    _, labels = sample_gmm(model, n, seed=2, return_labels=True)
    freq = np.bincount(labels, minlength=4) / n
    se = np.sqrt(model.weights * (1 - model.weights) / n)
    assert np.all(np.abs(freq - model.weights) < 4 * se)


def test_single_component_covariance(rng):
    cov = random_spd(rng, scale=0.05, jitter=1e-3)
    model = Gmm4(np.array([1.0]), np.array([[0.0, 0.0, 1.0, 0.5]]), cov[None])
    pts = sample_gmm(model, 100_000, seed=3)
    est = np.cov(pts[:, :3].T)
    assert np.linalg.norm(est - cov[:3, :3]) < 0.05 * np.linalg.norm(cov[:3, :3])


def test_gray_is_clamped():
    cov = np.eye(4)
    model = Gmm4(np.array([1.0]), np.array([[0.0, 0, 0, 0.5]]), cov[None])
    pts = sample_gmm(model, 2000, seed=0)
    assert pts[:, 3].min() >= 0 and pts[:, 3].max() <= 1
    rec = reconstruct(model, 2000, seed=0)
    assert rec[:, 3].min() >= 0 and rec[:, 3].max() <= 1


def test_decorrelated_reconstruction_uses_gray_mean():
    cov = np.diag([0.1, 0.1, 0.1, 0.02])
    model = Gmm4(np.array([1.0]), np.array([[0.0, 0, 1, 0.3]]), cov[None])
    np.testing.assert_allclose(reconstruct(model, 500, seed=4)[:, 3], 0.3)


def test_reconstruction_is_deterministic(rng):
    model = random_model(rng)
    np.testing.assert_array_equal(reconstruct(model, 300, 9), reconstruct(model, 300, 9))
    assert not np.array_equal(reconstruct(model, 300, 9), reconstruct(model, 300, 10))


def test_rejects_nonpositive_count(rng):
    with pytest.raises(ParameterError):
        sample_gmm(random_model(rng), 0, seed=0)


def test_plane_reconstruction_error(plane_scene, intrinsics):
    model = fit_sogmm(plane_scene, intrinsics, MeanShiftConfig(bandwidth=0.01), EmConfig())
    truth = depth_to_pointcloud(plane_scene, intrinsics)
    rec = reconstruct(model, 3 * len(truth), seed=0)
    assert mean_reconstruction_error(rec, truth) <= 0.01

