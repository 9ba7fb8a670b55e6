"""Mode seeking in (depth, gray) space and the component-count estimate.

Both the fixed-anchor (GMS) and blurring (GBMS) updates are supported with
either a Gaussian or a flat kernel.  Exact duplicates are collapsed into
weighted points before iterating: identical points receive identical
updates under both variants, so the collapse changes nothing but the cost.
Depth-camera data is quantized (millimeter depth, 8-bit gray), which makes
this collapse very effective in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .core import ImagePair, MeanShiftConfig, extract_depth_intensity
from .exceptions import EmptyDataError, ParameterError

# Upper bound on pairwise entries materialized at once by the dense paths.
_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class ModeSet:
    """Compressed dataset: the distinct modes found by mean shift.

    ``labels`` maps every input point to its mode; ``n_iter`` is the number
    of shift iterations actually run.
    """

    modes: np.ndarray
    labels: np.ndarray
    n_iter: int

    @property
    def count(self) -> int:
        return self.modes.shape[0]

    def __len__(self):
        return self.count


@dataclass(frozen=True)
class PriDiagnostics:
    rqe: float
    csd: float

    @property
    def objective(self) -> float:
        return self.rqe + self.csd


def _check_sigma(sigma):
    if not sigma > 0:
        raise ParameterError(f"bandwidth must be > 0, got {sigma}")


def _as_points(data, name="data"):
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyDataError(f"{name} must be a non-empty (n, D) array")
    return pts


def gaussian_kernel(diff, sigma, dim=None):
    """Isotropic Gaussian kernel with bandwidth ``sigma``.

    ``diff`` may hold many difference vectors along its leading axes; the
    last axis is the dimension.  Normalized by ``sigma**D`` so the kernel
    integrates to one.
    """
    _check_sigma(sigma)
    diff = np.asarray(diff, dtype=np.float64)
    if dim is None:
        dim = diff.shape[-1] if diff.ndim else 1
    sq = np.sum(np.square(diff), axis=-1) if diff.ndim else diff**2
    norm = (2.0 * math.pi) ** (-dim / 2.0) * sigma ** (-dim)
    return norm * np.exp(-sq / (2.0 * sigma**2))


def flat_kernel(diff, sigma):
    """Indicator of the closed ball of radius ``sigma`` (1 inside, 0 outside)."""
    _check_sigma(sigma)
    diff = np.asarray(diff, dtype=np.float64)
    dist = np.sqrt(np.sum(np.square(diff), axis=-1)) if diff.ndim else abs(diff)
    return np.where(dist <= sigma, 1, 0)


def kde_density(query, data, sigma, weights=None):
    """Kernel density estimate at ``query`` (one point or an (n, D) array)."""
    _check_sigma(sigma)
    data = _as_points(data)
    q = np.asarray(query, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    d = data.shape[1]
    w = _normalized_weights(weights, data.shape[0])
    out = np.empty(q.shape[0])
    for sl in _row_chunks(q.shape[0], data.shape[0]):
        k = gaussian_kernel(q[sl, None, :] - data[None, :, :], sigma, d)
        out[sl] = k @ w
    return out[0] if single else out


def _normalized_weights(weights, n):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64)
    return w / w.sum()


def _row_chunks(n_rows, n_cols):
    step = max(1, _CHUNK_ENTRIES // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def kernel_weighted_mean(anchors, kernel_values, fallback=None):
    """Average ``anchors`` using row-wise kernel weights.

    ``kernel_values[i, j]`` weighs anchor ``j`` for output ``i``.  Rows with
    zero total weight return ``fallback[i]`` (the current point).
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    k = kernel_values
    num = k @ anchors
    den = np.asarray(k.sum(axis=1)).ravel()
    out = np.empty_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok, None]
    if not ok.all():
        if fallback is None:
            raise ParameterError("a point has no anchor inside the kernel support")
        out[~ok] = np.asarray(fallback, dtype=np.float64)[~ok]
    return out


def _gaussian_shift(current, anchors, anchor_w, sigma):
    out = np.empty_like(current)
    log_w = np.log(anchor_w)
    for sl in _row_chunks(current.shape[0], anchors.shape[0]):
        sq = np.sum(np.square(current[sl, None, :] - anchors[None, :, :]), axis=-1)
        logk = log_w[None, :] - sq / (2.0 * sigma**2)
        # Row-wise shift cancels in the ratio and keeps far points finite.
        logk -= logk.max(axis=1, keepdims=True)
        out[sl] = kernel_weighted_mean(anchors, np.exp(logk))
    return out


def _flat_shift(current, anchors, anchor_w, sigma):
    tree = cKDTree(anchors)
    neigh = tree.query_ball_point(current, r=sigma, return_sorted=True)
    lengths = np.fromiter((len(n) for n in neigh), dtype=np.int64, count=len(neigh))
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    indices = (
        np.concatenate([np.asarray(n, dtype=np.int64) for n in neigh])
        if indptr[-1]
        else np.empty(0, dtype=np.int64)
    )
    k = sparse.csr_matrix(
        (anchor_w[indices], indices, indptr), shape=(current.shape[0], anchors.shape[0])
    )
    return kernel_weighted_mean(anchors, k, fallback=current)


def mean_shift_step(current, anchors, cfg: MeanShiftConfig, anchor_weights=None):
    """One mean-shift update of ``current`` toward kernel-weighted ``anchors``.

    For GMS the anchors are the original data; for GBMS they are the
    previous iterate.  With the flat kernel a point with no anchor inside
    its support stays where it is.
    """
    current = _as_points(current, "current")
    anchors = _as_points(anchors, "anchors")
    if anchor_weights is None:
        anchor_weights = np.ones(anchors.shape[0])
    anchor_weights = np.asarray(anchor_weights, dtype=np.float64)
    if cfg.kernel == "gaussian":
        return _gaussian_shift(current, anchors, anchor_weights, cfg.bandwidth)
    return _flat_shift(current, anchors, anchor_weights, cfg.bandwidth)


def _collapse(points, weights, mapping):
    uniq, inv, _ = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    w = np.bincount(inv, weights=weights, minlength=uniq.shape[0])
    return uniq, w, inv[mapping]


def _merge_modes(points, weights, radius):
    """Single-linkage merge until every pair of modes is more than ``radius`` apart."""
    labels = np.arange(points.shape[0])
    while True:
        pairs = cKDTree(points).query_pairs(radius, output_type="ndarray")
        if pairs.shape[0] == 0:
            return points, weights, labels
        n = points.shape[0]
        graph = sparse.coo_matrix(
            (np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
        )
        n_comp, comp = connected_components(graph, directed=False)
        w = np.bincount(comp, weights=weights, minlength=n_comp)
        merged = np.column_stack(
            [np.bincount(comp, weights=weights * points[:, j], minlength=n_comp) / w
             for j in range(points.shape[1])]
        )
        points, weights, labels = merged, w, comp[labels]


def run_mean_shift(data, cfg: MeanShiftConfig) -> ModeSet:
    """Iterate mean shift to convergence and merge the result into modes.

    Stops when the largest point displacement, relative to the largest
    point norm, drops below ``cfg.convergence_tol`` or after
    ``cfg.max_iterations`` steps.
    """
    y0 = _as_points(data)
    n = y0.shape[0]
    current, weights, mapping = _collapse(y0, np.ones(n), np.arange(n))
    anchors, anchor_w = current, weights
    scale = max(float(np.max(np.linalg.norm(current, axis=1))), np.finfo(float).tiny)

    n_iter = 0
    for n_iter in range(1, cfg.max_iterations + 1):
        if cfg.variant == "gbms":
            anchors, anchor_w = current, weights
        new = mean_shift_step(current, anchors, cfg, anchor_w)
        shift = float(np.max(np.linalg.norm(new - current, axis=1))) / scale
        current, weights, mapping = _collapse(new, weights, mapping)
        if shift < cfg.convergence_tol:
            break

    modes, _, labels = _merge_modes(current, weights, cfg.merge_radius)
    return ModeSet(modes=modes, labels=labels[mapping], n_iter=n_iter)


def estimate_num_components(pair: ImagePair, cfg: MeanShiftConfig) -> int:
    """Number of distinct (depth, gray) modes in the image pair."""
    data = extract_depth_intensity(pair.subsample(cfg.stride))
    return run_mean_shift(data, cfg).count


def _log_information_potential(a, b, sigma):
    """log of the mean Gaussian (bandwidth sqrt(2)*sigma) over all pairs."""
    s = math.sqrt(2.0) * sigma
    d = a.shape[1]
    log_norm = -0.5 * d * math.log(2.0 * math.pi) - d * math.log(s)
    parts = []
    for sl in _row_chunks(a.shape[0], b.shape[0]):
        sq = np.sum(np.square(a[sl, None, :] - b[None, :, :]), axis=-1)
        parts.append(logsumexp(-sq / (2.0 * s * s)))
    return float(logsumexp(parts)) + log_norm - math.log(a.shape[0] * b.shape[0])


def pri_objective(reduced, original, sigma) -> PriDiagnostics:
    """Closed-form redundancy and distortion terms for a compressed set.

    ``reduced`` may be a :class:`ModeSet` or an (n, D) array.  Every point
    in either set carries equal weight.
    """
    _check_sigma(sigma)
    if isinstance(reduced, ModeSet):
        reduced = reduced.modes
    r = _as_points(reduced, "reduced")
    y = _as_points(original, "original")
    v_rr = _log_information_potential(r, r, sigma)
    v_yy = _log_information_potential(y, y, sigma)
    v_ry = _log_information_potential(r, y, sigma)
    return PriDiagnostics(rqe=-v_rr, csd=-2.0 * v_ry + v_rr + v_yy)
