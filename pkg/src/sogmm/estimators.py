"""scikit-learn compatible front ends.

:class:`MeanShiftModes` clusters (depth, gray) samples into modes and
:class:`SOGMM` fits the full self-organizing mixture on an (x, y, z, g)
point cloud.  Both follow the usual ``fit``/``predict`` conventions and
expose their hyper-parameters through ``get_params``/``set_params``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import (
    CameraIntrinsics,
    EmConfig,
    Gmm4,
    ImagePair,
    MeanShiftConfig,
    depth_to_pointcloud,
)
from .fit import assign_nearest, kmeans_pp_seed, log_gaussian, run_em
from .meanshift import estimate_num_components, run_mean_shift
from .recon import reconstruct, sample_gmm
from .regress import ConditionalRegressor


def _check_points(X, n_features, name="X"):
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != n_features:
        raise ValueError(f"{name} must have {n_features} columns, got {X.shape[1]}")
    return X


class MeanShiftModes(ClusterMixin, BaseEstimator):
    """Mean-shift mode seeking with a flat or Gaussian kernel.

    Parameters
    ----------
    bandwidth : float
        Kernel scale, shared by every input dimension.
    kernel : {"flat", "gaussian"}
    variant : {"gbms", "gms"}
        Blurring (anchors follow the iterate) or fixed-anchor updates.
    max_iter : int
    tol : float
        Relative displacement below which iteration stops.
    merge_radius : float or None
        Converged points closer than this are one mode; ``None`` uses
        ``bandwidth / 2``.
    """

    def __init__(self, bandwidth=0.01, kernel="flat", variant="gbms", max_iter=100,
                 tol=1e-4, merge_radius=None):
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.variant = variant
        self.max_iter = max_iter
        self.tol = tol
        self.merge_radius = merge_radius

    def _config(self):
        return MeanShiftConfig(
            bandwidth=self.bandwidth, kernel=self.kernel, variant=self.variant,
            max_iterations=self.max_iter, convergence_tol=self.tol,
            mode_merge_radius=self.merge_radius,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        result = run_mean_shift(X, self._config())
        self.cluster_centers_ = result.modes
        self.labels_ = result.labels
        self.n_iter_ = result.n_iter
        self.n_modes_ = result.count
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = _check_points(X, self.n_features_in_)
        return assign_nearest(X, self.cluster_centers_)


class SOGMM(DensityMixin, BaseEstimator):
    """Gaussian mixture over (x, y, z, g) whose size is chosen by mean shift.

    ``fit`` runs mode seeking on the (z, g) columns (depth equals z for
    back-projected pixels), seeds that many clusters with K-Means++ and
    refines them with EM.  ``predict`` regresses intensity for spatial
    points.

    Parameters
    ----------
    bandwidth : float
        The single scale parameter; smaller values give more components.
    kernel, variant : str
        Mean-shift kernel and update rule, see :class:`MeanShiftModes`.
    ms_max_iter, ms_tol : int, float
        Mean-shift stopping controls.
    merge_radius : float or None
    stride : int
        Use every ``stride``-th sample for mode seeking only.
    max_iter, tol : int, float
        EM iteration cap and relative log-likelihood tolerance.
    reg_covar : float
        Minimum covariance eigenvalue.
    random_state : int
        Seed for K-Means++.
    """

    def __init__(self, bandwidth=0.01, kernel="flat", variant="gbms", ms_max_iter=100,
                 ms_tol=1e-4, merge_radius=None, stride=1, max_iter=100, tol=1e-6,
                 reg_covar=1e-6, random_state=0):
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.variant = variant
        self.ms_max_iter = ms_max_iter
        self.ms_tol = ms_tol
        self.merge_radius = merge_radius
        self.stride = stride
        self.max_iter = max_iter
        self.tol = tol
        self.reg_covar = reg_covar
        self.random_state = random_state

    def _ms_config(self):
        return MeanShiftConfig(
            bandwidth=self.bandwidth, kernel=self.kernel, variant=self.variant,
            max_iterations=self.ms_max_iter, convergence_tol=self.ms_tol,
            mode_merge_radius=self.merge_radius, stride=self.stride,
        )

    def _em_config(self):
        return EmConfig(max_iterations=self.max_iter, loglik_rel_tol=self.tol,
                        covariance_floor=self.reg_covar,
                        rng_seed=int(self.random_state or 0))

    def fit(self, X, y=None):
        X = _check_points(X, 4)
        ms_cfg = self._ms_config()
        modes = run_mean_shift(X[:: ms_cfg.stride, 2:4], ms_cfg)
        return self._fit_mixture(X, modes.count)

    def fit_image(self, pair: ImagePair, intrinsics: CameraIntrinsics):
        """Fit from a registered image pair; ``stride`` subsamples pixels."""
        m = estimate_num_components(pair, self._ms_config())
        return self._fit_mixture(depth_to_pointcloud(pair, intrinsics), m)

    def _fit_mixture(self, X, m):
        em_cfg = self._em_config()
        result = run_em(X, kmeans_pp_seed(X, m, em_cfg.rng_seed), em_cfg)
        self._set_model(result.model)
        self.log_likelihoods_ = result.log_likelihoods
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    def _set_model(self, model: Gmm4):
        self.model_ = model
        self.n_components_ = model.n_components
        self.weights_ = model.weights
        self.means_ = model.means
        self.covariances_ = model.covariances
        self.n_features_in_ = 4
        self._regressor = ConditionalRegressor(model)

    @classmethod
    def from_model(cls, model: Gmm4, bandwidth=0.01, **params):
        """Wrap an existing mixture (for example one read from disk)."""
        est = cls(bandwidth=bandwidth, **params)
        est._set_model(model)
        return est

    def predict(self, X):
        """Expected intensity in [0, 1] for each (x, y, z) row."""
        check_is_fitted(self, "model_")
        return self._regressor.expected(_check_points(X, 3))

    def score_samples(self, X):
        """Log density of each (x, y, z, g) row under the mixture."""
        check_is_fitted(self, "model_")
        X = _check_points(X, 4)
        log_joint = log_gaussian(X, self.means_, self.covariances_) + np.log(self.weights_)
        return logsumexp(log_joint, axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "model_")
        seed = self.random_state if random_state is None else random_state
        return sample_gmm(self.model_, n_samples, seed)

    def reconstruct(self, n_samples=1, random_state=None):
        """Sample spatial points and color them by regression."""
        check_is_fitted(self, "model_")
        seed = self.random_state if random_state is None else random_state
        return reconstruct(self.model_, n_samples, seed)
