"""K-Means++ seeding and EM fitting of the 4D mixture."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .core import (
    CameraIntrinsics,
    EmConfig,
    Gmm4,
    ImagePair,
    MeanShiftConfig,
    depth_to_pointcloud,
)
from .exceptions import EmptyDataError, NumericalFailureError, ParameterError
from .meanshift import estimate_num_components

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
# Components whose responsibility mass falls below this are treated as empty.
_EMPTY_MASS = 1e-8


@dataclass(frozen=True)
class KInitResult:
    centroids: np.ndarray
    assignment: np.ndarray
    seed_indices: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


@dataclass
class EmResult:
    model: Gmm4
    log_likelihoods: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _as_cloud(cloud):
    x = np.asarray(cloud, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyDataError("point cloud must be a non-empty (n, D) array")
    if not np.all(np.isfinite(x)):
        raise ParameterError("point cloud contains non-finite values")
    return x


def assign_nearest(points, centroids):
    """Index of the nearest centroid for every point."""
    _, idx = cKDTree(centroids).query(points, k=1)
    return np.asarray(idx, dtype=np.int64)


def kmeans_pp_seed(cloud, m: int, seed: int) -> KInitResult:
    """K-Means++ seeding followed by a single nearest-centroid assignment.

    No Lloyd refinement is performed.  If every remaining point coincides
    with a chosen centroid, further seeds are drawn uniformly from the
    points not yet chosen.
    """
    x = _as_cloud(cloud)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ParameterError(f"cannot seed {m} clusters from {n} points")
    rng = np.random.default_rng(seed)

    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    for k in range(1, m):
        cum = np.cumsum(d2)
        total = cum[-1]
        if total > 0:
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            free = np.flatnonzero(~taken)
            idx = int(free[rng.integers(free.size)])
        chosen[k] = idx
        taken[idx] = True
        np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1), out=d2)

    centroids = x[chosen].copy()
    return KInitResult(centroids, assign_nearest(x, centroids), chosen)


def floor_covariances(covs, floor):
    """Raise every eigenvalue below ``floor`` to ``floor``.

    This is the maximizer of the Gaussian M-step objective over covariances
    whose spectrum is bounded below, so EM keeps its ascent property.
    """
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    vals, vecs = np.linalg.eigh(covs)
    vals = np.maximum(vals, floor)
    out = (vecs * vals[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def log_gaussian(x, means, covs):
    """Log density of every point under every component, shape (n, M)."""
    n, d = x.shape
    chol = np.linalg.cholesky(covs)
    out = np.empty((n, means.shape[0]))
    for k in range(means.shape[0]):
        z = solve_triangular(chol[k], (x - means[k]).T, lower=True)
        half_logdet = np.sum(np.log(np.diag(chol[k])))
        out[:, k] = -0.5 * (d * _LOG_2PI + np.sum(z * z, axis=0)) - half_logdet
    return out


def e_step(x, weights, means, covs):
    """Return ``(resp, point_loglik)``; responsibilities are computed in log space."""
    with np.errstate(divide="ignore"):
        log_joint = log_gaussian(x, means, covs) + np.log(weights)[None, :]
    point_ll = logsumexp(log_joint, axis=1)
    resp = np.exp(log_joint - point_ll[:, None])
    return resp, point_ll


def m_step(x, resp, floor, point_ll=None):
    """Maximum-likelihood update of the mixture from soft assignments.

    Components left without responsibility mass are moved onto the point
    with the lowest density under the current model (``point_ll``).
    """
    n, d = x.shape
    nk = resp.sum(axis=0)
    empty = nk < _EMPTY_MASS
    safe_nk = np.where(empty, 1.0, nk)
    means = (resp.T @ x) / safe_nk[:, None]
    covs = np.empty((nk.size, d, d))
    for k in range(nk.size):
        diff = x - means[k]
        covs[k] = (resp[:, k, None] * diff).T @ diff / safe_nk[k]
    if empty.any():
        order = np.argsort(point_ll if point_ll is not None else np.zeros(n), kind="stable")
        for j, k in enumerate(np.flatnonzero(empty)):
            logger.debug("re-seeding empty component %d", k)
            means[k] = x[order[j % n]]
            covs[k] = 0.0
            nk[k] = 1.0
    weights = nk / nk.sum()
    return weights, means, floor_covariances(covs, floor)


def init_from_partition(x, init: KInitResult, floor):
    """Mixture parameters from hard cluster proportions, means and covariances."""
    m = init.n_clusters
    resp = np.zeros((x.shape[0], m))
    resp[np.arange(x.shape[0]), init.assignment] = 1.0
    nk = resp.sum(axis=0)
    weights, means, covs = m_step(x, resp, floor)
    # Empty hard clusters keep their seed as the mean.
    empty = nk == 0
    if empty.any():
        means[empty] = init.centroids[empty]
        covs[empty] = floor * np.eye(x.shape[1])
    return weights, means, covs


def _total_loglik(point_ll, iteration):
    ll = float(point_ll.sum())
    if not math.isfinite(ll):
        raise NumericalFailureError("non-finite log-likelihood", iteration=iteration)
    return ll


def run_em(cloud, init: KInitResult, cfg: EmConfig) -> EmResult:
    """EM with the per-iteration log-likelihood trace.

    ``log_likelihoods[0]`` belongs to the initial (hard-partition) model and
    entry ``t`` to the model after ``t`` EM iterations.
    """
    x = _as_cloud(cloud)
    m = init.n_clusters
    if x.shape[0] <= m:
        raise ParameterError(f"need more than {m} points to fit {m} components")
    it = 0
    try:
        weights, means, covs = init_from_partition(x, init, cfg.covariance_floor)
        resp, point_ll = e_step(x, weights, means, covs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"linear algebra failure: {exc}", iteration=0) from exc
    ll = _total_loglik(point_ll, 0)
    history = [ll]
    converged = False
    for it in range(1, cfg.max_iterations + 1):
        try:
            weights, means, covs = m_step(x, resp, cfg.covariance_floor, point_ll)
            resp, point_ll = e_step(x, weights, means, covs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"linear algebra failure: {exc}", iteration=it) from exc
        new_ll = _total_loglik(point_ll, it)
        history.append(new_ll)
        gain = (new_ll - ll) / max(abs(ll), np.finfo(float).tiny)
        ll = new_ll
        if gain < cfg.loglik_rel_tol:
            converged = True
            break
    logger.debug("EM stopped after %d iterations, loglik %.6g", it, ll)
    return EmResult(Gmm4(weights, means, covs), history, it, converged)


def em_fit(cloud, init: KInitResult, cfg: EmConfig) -> Gmm4:
    return run_em(cloud, init, cfg).model


def fit_sogmm(
    pair: ImagePair,
    k: CameraIntrinsics,
    ms_cfg: MeanShiftConfig | None = None,
    em_cfg: EmConfig | None = None,
) -> Gmm4:
    """Estimate the component count from the image pair, then fit the 4D mixture."""
    ms_cfg = ms_cfg or MeanShiftConfig()
    em_cfg = em_cfg or EmConfig()
    m = estimate_num_components(pair, ms_cfg)
    cloud = depth_to_pointcloud(pair, k)
    logger.info("estimated %d components from %d points", m, cloud.shape[0])
    init = kmeans_pp_seed(cloud, m, em_cfg.rng_seed)
    return em_fit(cloud, init, em_cfg)
