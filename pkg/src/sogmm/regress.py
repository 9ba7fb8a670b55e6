"""Intensity regression from the joint spatial-intensity mixture."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .core import CameraIntrinsics, ConditionalGaussianTerms, Gmm4
from .exceptions import OutOfSupportError

_LOG_2PI = math.log(2.0 * math.pi)


class ConditionalRegressor:
    """Per-component conditioning terms, factorized once per model.

    Spatial covariance blocks are Cholesky-factorized at construction so
    repeated queries (one per pixel) only pay for triangular solves.
    """

    def __init__(self, model: Gmm4):
        self.model = model
        self.terms = ConditionalGaussianTerms.from_model(model)
        t = self.terms
        m = model.n_components
        self._chol = []
        self.gain = np.empty((m, 3))
        self.log_norm = np.empty(m)
        for k in range(m):
            c, low = cho_factor(t.sigma_xx[k], lower=True)
            self._chol.append((c, low))
            self.gain[k] = cho_solve((c, low), t.sigma_xg[k])
            self.log_norm[k] = -1.5 * _LOG_2PI - np.sum(np.log(np.diag(c)))
        # Schur complement of the spatial block.
        self.cond_var = t.sigma_gg - np.einsum("ki,ki->k", self.gain, t.sigma_xg)
        self.log_weights = np.log(model.weights)

    def log_spatial(self, x):
        """log(pi_m * N(x; mu_x, Sigma_xx)) for each query row, shape (n, M)."""
        out = np.empty((x.shape[0], self.model.n_components))
        for k, (c, _) in enumerate(self._chol):
            z = solve_triangular(c, (x - self.terms.mu_x[k]).T, lower=True)
            with np.errstate(over="ignore"):
                out[:, k] =self.log_weights[k] + self.log_norm[k] - 0.5 * np.sum(z * z, axis=0)
        return out

    def weights(self, x, strict=True):
        """Rows with no spatial mass raise, or become NaN when ``strict=False``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        log_joint = self.log_spatial(x)
        total = logsumexp(log_joint, axis=1)
        bad = ~np.isfinite(total)
        if bad.any():
            if strict:
                raise OutOfSupportError("spatial marginal has zero mass at query point")
            total[bad] = np.nan
        return np.exp(log_joint - total[:, None])

    def conditional_means(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        diff = x[:, None, :] - self.terms.mu_x[None, :, :]
        return self.terms.mu_g[None, :] + np.einsum("nki,ki->nk", diff, self.gain)

    def expected(self, x, clip=True, strict=True):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        lam = np.sum(self.weights(x, strict) * self.conditional_means(x), axis=1)
        return np.clip(lam, 0.0, 1.0) if clip else lam

    def density(self, x, g):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        g = np.asarray(g, dtype=np.float64)
        w = self.weights(x)
        lam = self.conditional_means(x)
        var = self.cond_var[None, :]
        diff = g.reshape(-1, 1) - lam
        pdf = np.exp(-0.5 * diff**2 / var) / np.sqrt(2.0 * math.pi * var)
        return np.sum(w * pdf, axis=1)


def _regressor(model):
    return model if isinstance(model, ConditionalRegressor) else ConditionalRegressor(model)


def _squeeze(values, x):
    return float(values[0]) if np.ndim(x) == 1 else values


def conditional_weights(model, x):
    """Posterior component weights given the spatial location(s) ``x``."""
    return _regressor(model).weights(x)


def conditional_intensity_density(model, x, g):
    """Density of intensity ``g`` given location ``x`` under the mixture.

    ``x`` may be a single 3-vector (with scalar or array ``g``) or (n, 3)
    rows paired element-wise with ``g``.
    """
    values = _regressor(model).density(x, g)
    return float(values[0]) if np.ndim(x) == 1 and np.ndim(g) == 0 else values


def expected_intensity(model, x, clip=True):
    """Conditional mean intensity at ``x``, clamped to [0, 1] by default."""
    return _squeeze(_regressor(model).expected(x, clip=clip), x)


def regress_image(model, k: CameraIntrinsics, depth) -> np.ndarray:
    """Render an intensity image for a depth map; invalid pixels are 0."""
    depth = np.asarray(depth, dtype=np.float64)
    out = np.zeros(depth.shape)
    v, u = np.nonzero(depth > 0)
    if v.size == 0:
        return out
    d = depth[v, u]
    x = np.column_stack([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d])
    out[v, u] = _regressor(model).expected(x)
    return out
