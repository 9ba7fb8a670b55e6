"""Domain types and image-to-point conversions.

All containers are frozen dataclasses holding read-only numpy arrays, so
they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import EmptyDataError, ParameterError

WEIGHT_SUM_TOL = 1e-9


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImagePair:
    """Registered depth (meters, 0 = invalid) and gray ([0, 1]) images."""

    depth: np.ndarray
    gray: np.ndarray

    def __post_init__(self):
        depth = _frozen(self.depth)
        gray = _frozen(self.gray)
        if depth.ndim != 2 or gray.ndim != 2:
            raise ParameterError("depth and gray must be 2-D images")
        if depth.shape != gray.shape:
            raise ParameterError(
                f"depth {depth.shape} and gray {gray.shape} differ in size"
            )
        if depth.size == 0:
            raise ParameterError("images must be non-empty")
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise ParameterError("depth values must be finite and >= 0")
        if not np.all(np.isfinite(gray)) or np.any((gray < 0) | (gray > 1)):
            raise ParameterError("gray values must lie in [0, 1]")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "gray", gray)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        return self.depth > 0

    def subsample(self, stride: int) -> "ImagePair":
        """Keep every ``stride``-th row and column."""
        if stride < 1:
            raise ParameterError(f"stride must be >= 1, got {stride}")
        if stride == 1:
            return self
        return ImagePair(self.depth[::stride, ::stride], self.gray[::stride, ::stride])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ParameterError("focal lengths must be positive")

    @classmethod
    def from_string(cls, text: str) -> "CameraIntrinsics":
        """Parse ``"fx,fy,cx,cy"``."""
        try:
            fx, fy, cx, cy = (float(v) for v in text.split(","))
        except ValueError as exc:
            raise ParameterError(
                f"intrinsics must be 'fx,fy,cx,cy', got {text!r}"
            ) from exc
        return cls(fx, fy, cx, cy)


@dataclass(frozen=True)
class MeanShiftConfig:
    """Controls for mode seeking in (depth, gray) space.

    ``mode_merge_radius=None`` means half the bandwidth.
    """

    bandwidth: float = 0.01
    kernel: str = "flat"
    variant: str = "gbms"
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    mode_merge_radius: float | None = None
    stride: int = 1

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ParameterError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.kernel not in ("flat", "gaussian"):
            raise ParameterError(f"unknown kernel {self.kernel!r}")
        if self.variant not in ("gbms", "gms"):
            raise ParameterError(f"unknown variant {self.variant!r}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ParameterError("convergence_tol must be > 0")
        if self.mode_merge_radius is not None and not self.mode_merge_radius > 0:
            raise ParameterError("mode_merge_radius must be > 0")
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")

    @property
    def merge_radius(self) -> float:
        if self.mode_merge_radius is None:
            return self.bandwidth / 2.0
        return self.mode_merge_radius


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 100
    loglik_rel_tol: float = 1e-6
    covariance_floor: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not self.loglik_rel_tol >= 0:
            raise ParameterError("loglik_rel_tol must be >= 0")
        if not self.covariance_floor > 0:
            raise ParameterError("covariance_floor must be > 0")


class GaussianComponent4(NamedTuple):
    weight: float
    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class Gmm4:
    """Finite Gaussian mixture over (x, y, z, g)."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)
    weight_tol: float = field(default=WEIGHT_SUM_TOL, repr=False, compare=False)

    def __post_init__(self):
        weights = _frozen(np.atleast_1d(self.weights))
        means = _frozen(np.atleast_2d(self.means))
        covs = _frozen(self.covariances)
        if covs.ndim == 2:
            covs = _frozen(covs[None])
        m = weights.shape[0]
        if m < 1:
            raise ParameterError("a mixture needs at least one component")
        if means.shape != (m, 4) or covs.shape != (m, 4, 4):
            raise ParameterError(
                f"inconsistent shapes: weights {weights.shape}, "
                f"means {means.shape}, covariances {covs.shape}"
            )
        if self.check:
            if np.any(weights <= 0) or np.any(weights > 1):
                raise ParameterError("weights must lie in (0, 1]")
            if abs(weights.sum() - 1.0) > self.weight_tol:
                raise ParameterError(f"weights sum to {weights.sum()!r}, not 1")
            if not np.allclose(covs, np.swapaxes(covs, 1, 2), rtol=1e-6, atol=1e-12):
                raise ParameterError("covariances must be symmetric")
            if np.any(np.linalg.eigvalsh(covs) <= 0):
                raise ParameterError("covariances must be positive definite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    M = n_components

    @property
    def components(self) -> list[GaussianComponent4]:
        return [
            GaussianComponent4(float(w), mu, cov)
            for w, mu, cov in zip(self.weights, self.means, self.covariances)
        ]

    @classmethod
    def from_components(cls, components) -> "Gmm4":
        comps = list(components)
        return cls(
            np.array([c.weight for c in comps]),
            np.array([c.mean for c in comps]),
            np.array([c.covariance for c in comps]),
        )


@dataclass(frozen=True)
class ConditionalGaussianTerms:
    """Spatial / intensity blocks of each component's mean and covariance.

    Arrays carry a leading component axis.
    """

    mu_x: np.ndarray  # (M, 3)
    mu_g: np.ndarray  # (M,)
    sigma_xx: np.ndarray  # (M, 3, 3)
    sigma_xg: np.ndarray  # (M, 3)
    sigma_gx: np.ndarray  # (M, 3)
    sigma_gg: np.ndarray  # (M,)

    @classmethod
    def from_model(cls, model: Gmm4) -> "ConditionalGaussianTerms":
        mu, cov = model.means, model.covariances
        return cls(
            mu_x=_frozen(mu[:, :3]),
            mu_g=_frozen(mu[:, 3]),
            sigma_xx=_frozen(cov[:, :3, :3]),
            sigma_xg=_frozen(cov[:, :3, 3]),
            sigma_gx=_frozen(cov[:, 3, :3]),
            sigma_gg=_frozen(cov[:, 3, 3]),
        )

    def reassemble(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(means, covariances)`` rebuilt from the blocks."""
        m = self.mu_g.shape[0]
        means = np.empty((m, 4))
        means[:, :3] = self.mu_x
        means[:, 3] = self.mu_g
        covs = np.empty((m, 4, 4))
        covs[:, :3, :3] = self.sigma_xx
        covs[:, :3, 3] = self.sigma_xg
        covs[:, 3, :3] = self.sigma_gx
        covs[:, 3, 3] = self.sigma_gg
        return means, covs


def depth_to_pointcloud(pair: ImagePair, k: CameraIntrinsics) -> np.ndarray:
    """Back-project every valid depth pixel to an (x, y, z, g) row.

    Pixels are visited in row-major order; ``u`` is the column index and
    ``v`` the row index.
    """
    v, u = np.nonzero(pair.valid_mask)
    if v.size == 0:
        raise EmptyDataError("depth image has no valid pixels; point cloud is empty")
    d = pair.depth[v, u]
    cloud = np.empty((v.size, 4))
    cloud[:, 0] = (u - k.cx) * d / k.fx
    cloud[:, 1] = (v - k.cy) * d / k.fy
    cloud[:, 2] = d
    cloud[:, 3] = pair.gray[v, u]
    return cloud


def extract_depth_intensity(pair: ImagePair) -> np.ndarray:
    """Return the (depth, gray) tuples of valid pixels, row-major order."""
    mask = pair.valid_mask
    if not mask.any():
        raise EmptyDataError("depth image has no valid pixels; dataset is empty")
    return np.column_stack([pair.depth[mask], pair.gray[mask]])
