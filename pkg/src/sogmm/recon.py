"""Generative resampling of a fitted mixture."""

from __future__ import annotations

import logging

import numpy as np

from .core import Gmm4
from .exceptions import ParameterError
from .regress import ConditionalRegressor

logger = logging.getLogger(__name__)


def sqrt_covariances(covs):
    """Symmetric square root of each covariance matrix."""
    vals, vecs = np.linalg.eigh(covs)
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root[..., None, :]) @ np.swapaxes(vecs, -1, -2)


def sample_gmm(model: Gmm4, n: int, seed: int, return_labels=False):
    """Draw ``n`` i.i.d. points; the gray channel is clamped to [0, 1].

    With ``return_labels=True`` the component index of each draw is
    returned as well.
    """
    if n < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    weights = model.weights / model.weights.sum()
    comp = rng.choice(model.n_components, size=n, p=weights)
    z = rng.standard_normal((n, model.means.shape[1]))
    roots = sqrt_covariances(model.covariances)
    points = model.means[comp] + np.einsum("nij,nj->ni", roots[comp], z)
    np.clip(points[:, 3], 0.0, 1.0, out=points[:, 3])
    if return_labels:
        return points, comp
    return points


def reconstruct(model: Gmm4, n: int, seed: int) -> np.ndarray:
    """Sample spatial points and color them with the regressed intensity.

    Samples that land where the spatial marginal underflows keep their
    sampled intensity.
    """
    points = sample_gmm(model, n, seed)
    g = ConditionalRegressor(model).expected(points[:, :3], strict=False)
    missing = np.isnan(g)
    if missing.any():
        logger.warning("%d samples outside model support kept their sampled gray",
                       int(missing.sum()))
    points[~missing, 3] = g[~missing]
    return points
