"""Synthetic registered image pairs for tests, demos and benchmarks.

Depth is quantized to millimeters and gray to 8 bits, like the output of a
consumer RGB-D camera.
"""

from __future__ import annotations

import numpy as np

from .core import CameraIntrinsics, ImagePair


def _quantized(depth, gray):
    return ImagePair(np.round(depth * 1000.0) / 1000.0, np.round(gray * 255.0) / 255.0)


KINECT_FOCAL = 525.0


def synthetic_intrinsics(height=48, width=64, focal=KINECT_FOCAL) -> CameraIntrinsics:
    """Pinhole camera centered on the image.

    The default focal length is that of a 640x480 Kinect-class sensor, so a
    small synthetic image behaves like a crop of a real frame and keeps the
    real sensor's point spacing (about 2 mm per pixel at 1 m).
    """
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0)


def make_plane_scene(height=48, width=64, depth=1.0, gray=0.5) -> ImagePair:
    """Fronto-parallel plane of uniform intensity."""
    return _quantized(np.full((height, width), depth), np.full((height, width), gray))


def make_two_plane_scene(height=48, width=64) -> ImagePair:
    """Two slanted planes side by side, split into a dark and a bright band.

    The left plane recedes from 1.00 m to 1.15 m across its columns, the
    right one from 1.30 m to 1.40 m down its rows.  The top half is dark
    (about 0.25-0.35) and the bottom half bright (about 0.65-0.75), each
    with a gentle horizontal ramp.
    """
    v, u = np.mgrid[0:height, 0:width]
    left = u < width // 2
    depth = np.where(left, 1.0 + 0.15 * u / width, 1.3 + 0.1 * v / height)
    gray = np.where(v < height // 2, 0.25 + 0.1 * u / width, 0.75 - 0.1 * u / width)
    return _quantized(depth, gray)
