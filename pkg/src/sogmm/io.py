"""Image ingestion, model files and PLY export.

Model file layout (little-endian)::

    offset  size  field
    0       4     magic b"SGMM"
    4       1     format version (uint8, currently 1; dimension fixed at 4)
    5       3     component count M (uint24)
    8       4     bandwidth sigma (float32)
    12      60*M  M records of 15 float32: weight, mean[4],
                  upper-triangular covariance[10] in row-major order
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import Gmm4, ImagePair
from .exceptions import (
    BadMagicError,
    DimensionMismatchError,
    ModelFormatError,
    ParameterError,
    TruncatedFileError,
    UnreadableFileError,
    UnsupportedFormatError,
    VersionMismatchError,
)

MAGIC = b"SGMM"
VERSION = 1
DIM = 4
HEADER_SIZE = 12
RECORD_FLOATS = 1 + DIM + DIM * (DIM + 1) // 2
RECORD_SIZE = 4 * RECORD_FLOATS
MAX_COMPONENTS = (1 << 24) - 1
# float32 storage perturbs the weight sum by up to a few ulp per component.
LOADED_WEIGHT_TOL = 1e-5

_TRIU = np.triu_indices(DIM)
_IMAGE_FORMATS = {"PNG", "PPM"}  # Pillow reports PGM files as PPM
_SIXTEEN_BIT_MODES = {"I;16", "I;16L", "I;16B", "I"}


# -- images ----------------------------------------------------------------

def _read_single_channel(path):
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError as exc:
        raise UnreadableFileError(f"no such file: {path}") from exc
    except (UnidentifiedImageError, OSError) as exc:
        raise UnreadableFileError(f"cannot read image {path}: {exc}") from exc
    if img.format not in _IMAGE_FORMATS:
        raise UnsupportedFormatError(f"{path}: expected PNG or PGM, got {img.format}")
    return img


def _image_bits(img, path):
    if img.mode in _SIXTEEN_BIT_MODES:
        return 16
    if img.mode == "L":
        return 8
    raise UnsupportedFormatError(f"{path}: unsupported image mode {img.mode!r}")


def load_image_pair(depth_path, gray_path, depth_scale=1000.0) -> ImagePair:
    """Read a 16-bit depth image and an 8/16-bit gray image.

    Depth becomes ``raw / depth_scale`` meters; gray is divided by the
    maximum value of its bit depth.
    """
    if not depth_scale > 0:
        raise ParameterError("depth_scale must be positive")
    d_img = _read_single_channel(depth_path)
    g_img = _read_single_channel(gray_path)
    if _image_bits(d_img, depth_path) != 16:
        raise UnsupportedFormatError(f"{depth_path}: depth must be 16-bit single-channel")
    g_bits = _image_bits(g_img, gray_path)
    depth = np.asarray(d_img, dtype=np.float64)
    gray = np.asarray(g_img, dtype=np.float64)
    if depth.shape != gray.shape:
        raise DimensionMismatchError(
            f"depth is {depth.shape[1]}x{depth.shape[0]}, gray is "
            f"{gray.shape[1]}x{gray.shape[0]}"
        )
    return ImagePair(depth / depth_scale, gray / float((1 << g_bits) - 1))


def save_image_pair(pair: ImagePair, depth_path, gray_path, depth_scale=1000.0):
    """Write ``pair`` as a 16-bit depth PNG and an 8-bit gray PNG."""
    raw = np.round(pair.depth * depth_scale)
    if raw.max() > 65535:
        raise ParameterError("depth exceeds the 16-bit range at this depth_scale")
    Image.fromarray(raw.astype(np.uint16)).save(depth_path, format="PNG")
    gray = np.round(pair.gray * 255).astype(np.uint8)
    Image.fromarray(gray).save(gray_path, format="PNG")


# -- model files -----------------------------------------------------------

def model_to_bytes(model: Gmm4, sigma: float) -> bytes:
    m = model.n_components
    if m > MAX_COMPONENTS:
        raise ParameterError(f"{m} components exceed the file format limit")
    records = np.empty((m, RECORD_FLOATS), dtype="<f4")
    records[:, 0] = model.weights
    records[:, 1 : 1 + DIM] = model.means
    records[:, 1 + DIM :] = model.covariances[:, _TRIU[0], _TRIU[1]]
    header = MAGIC + struct.pack("<B", VERSION) + m.to_bytes(3, "little")
    header += struct.pack("<f", sigma)
    return header + records.tobytes()


def model_from_bytes(blob: bytes) -> tuple[Gmm4, float]:
    if len(blob) < HEADER_SIZE:
        raise TruncatedFileError(HEADER_SIZE, len(blob))
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version = blob[4]
    if version != VERSION:
        raise VersionMismatchError(f"unsupported model version {version}, expected {VERSION}")
    m = int.from_bytes(blob[5:8], "little")
    (sigma,) = struct.unpack("<f", blob[8:12])
    expected = HEADER_SIZE + RECORD_SIZE * m
    if len(blob) < expected:
        raise TruncatedFileError(expected, len(blob))
    if len(blob) > expected:
        raise ModelFormatError(f"{len(blob) - expected} trailing bytes after payload")
    if m == 0:
        raise ModelFormatError("model file holds no components")
    records = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(m, RECORD_FLOATS)
    records = records.astype(np.float64)
    covs = np.zeros((m, DIM, DIM))
    covs[:, _TRIU[0], _TRIU[1]] = records[:, 1 + DIM :]
    covs[:, _TRIU[1], _TRIU[0]] = records[:, 1 + DIM :]
    try:
        model = Gmm4(records[:, 0], records[:, 1 : 1 + DIM], covs,
                     weight_tol=LOADED_WEIGHT_TOL)
    except ParameterError as exc:
        raise ModelFormatError(f"invalid model parameters: {exc}") from exc
    # Shortest decimal that round-trips the stored float32 (0.01, not 0.0099999998).
    return model, float(str(np.float32(sigma)))


def save_model(model: Gmm4, sigma: float, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model, sigma))


def load_model(path) -> tuple[Gmm4, float]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise UnreadableFileError(f"cannot read model {path}: {exc}") from exc
    return model_from_bytes(blob)


# -- point clouds ----------------------------------------------------------

def quantize_gray(g):
    """Map [0, 1] intensities to 0..255 rounding halves up."""
    return np.clip(np.floor(np.asarray(g, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def export_ply(cloud, path, binary=False) -> None:
    """Write x, y, z (float) and gray (uchar) vertices to a PLY file."""
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 4)
    n = cloud.shape[0]
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {n}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar gray\n"
        "end_header\n"
    )
    gray = quantize_gray(cloud[:, 3])
    xyz = cloud[:, :3].astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            rec = np.empty(n, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("gray", "u1")])
            rec["x"], rec["y"], rec["z"], rec["gray"] = xyz[:, 0], xyz[:, 1], xyz[:, 2], gray
            fh.write(rec.tobytes())
        else:
            lines = (
                f"{float(a)!r} {float(b)!r} {float(c)!r} {int(g)}\n"
                for (a, b, c), g in zip(xyz, gray)
            )
            fh.write("".join(lines).encode("ascii"))
