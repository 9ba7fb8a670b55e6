"""Evaluation metrics: intensity PSNR, reconstruction error, model size."""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import EmptyDataError, ParameterError

# Returned by psnr() when the images agree exactly.
INFINITE_PSNR = math.inf

# 4-byte floats per record: weight, then either an NDT cell (mean 3,
# covariance 6) or a 4D component (covariance 10, mean 4).
_FLOATS_PER_RECORD = {"gmm4": 1 + 10 + 4, "ndt_cell": 1 + 3 + 6}

REPORT_FIELDS = ("dataset", "sigma", "M", "psnr_db", "mre_m", "mem_bytes", "fit_ms")


def psnr(reference, test, mask=None, peak=1.0):
    """Peak signal-to-noise ratio in dB over the masked pixels."""
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ParameterError(f"image shapes differ: {ref.shape} vs {tst.shape}")
    if mask is None:
        mask = np.ones(ref.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != ref.shape:
        raise ParameterError("mask shape does not match the images")
    if not mask.any():
        raise EmptyDataError("PSNR needs at least one valid pixel")
    mse = float(np.mean((ref[mask] - tst[mask]) ** 2))
    if mse == 0.0:
        return INFINITE_PSNR
    return 10.0 * math.log10(peak**2 / mse)


def nearest_distances(query, reference):
    """Euclidean distance from each query point to its nearest reference point."""
    query = np.asarray(query, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    _, idx = cKDTree(reference).query(query, k=1)
    # Recompute from the index so the value does not depend on tree internals.
    return np.sqrt(np.sum((query - reference[idx]) ** 2, axis=1))


def mean_reconstruction_error(recon, truth, symmetric=False):
    """Mean nearest-neighbor distance over the spatial (x, y, z) coordinates.

    One-sided (reconstruction to truth) by default; ``symmetric=True``
    averages both directions (Chamfer mean).
    """
    recon = np.asarray(recon, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if recon.ndim != 2 or truth.ndim != 2 or len(recon) == 0 or len(truth) == 0:
        raise EmptyDataError("both point clouds must be non-empty")
    a, b = recon[:, :3], truth[:, :3]
    forward = float(np.mean(nearest_distances(a, b)))
    if not symmetric:
        return forward
    return 0.5 * (forward + float(np.mean(nearest_distances(b, a))))


def model_memory_bytes(m: int, layout: str = "gmm4") -> int:
    if m < 0:
        raise ParameterError(f"component count must be >= 0, got {m}")
    try:
        per = _FLOATS_PER_RECORD[layout]
    except KeyError:
        raise ParameterError(f"unknown layout {layout!r}") from None
    return 4 * m * per


def bytes_to_mb(n_bytes) -> float:
    return n_bytes / 1e6


def write_report(rows, fh):
    """Write metric rows (dicts keyed by ``REPORT_FIELDS``) as CSV with a header."""
    writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in REPORT_FIELDS})


def _fmt(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return value
