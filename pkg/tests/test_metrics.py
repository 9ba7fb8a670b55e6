import io
import math

import numpy as np
import pytest

from sogmm.exceptions import EmptyDataError, ParameterError
from sogmm.io import HEADER_SIZE, model_to_bytes
from sogmm.metrics import (
    INFINITE_PSNR,
    REPORT_FIELDS,
    bytes_to_mb,
    mean_reconstruction_error,
    model_memory_bytes,
    nearest_distances,
    psnr,
    write_report,
)

from conftest import random_model


def brute_force_mre(a, b):
    d = np.sqrt(np.sum((a[:, None, :3] - b[None, :, :3]) ** 2, axis=-1))
    return d.min(axis=1).mean()


def test_psnr_identical_images_is_infinite(rng):
    img = rng.uniform(size=(5, 6))
    assert psnr(img, img) == INFINITE_PSNR == math.inf


def test_psnr_reference_values():
    zeros = np.zeros((4, 4))
    assert psnr(zeros, np.ones((4, 4))) == pytest.approx(0.0)
    assert psnr(zeros, np.full((4, 4), 0.1)) == pytest.approx(20.0)


def test_psnr_is_symmetric(rng):
    a, b = rng.uniform(size=(2, 8, 8))
    assert psnr(a, b) == psnr(b, a)


def test_psnr_decreases_with_noise(rng):
    img = rng.uniform(size=(16, 16))
    noise = rng.normal(size=img.shape)
    values = [psnr(img, img + s * noise) for s in (0.01, 0.05, 0.2)]
    assert values[0] > values[1] > values[2]


def test_psnr_respects_mask():
    a = np.zeros((2, 2))
    b = np.array([[0.0, 0.0], [0.0, 5.0]])
    mask = np.array([[True, True], [True, False]])
    assert psnr(a, b, mask) == INFINITE_PSNR


def test_psnr_errors():
    with pytest.raises(EmptyDataError):
        psnr(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2), bool))
    with pytest.raises(ParameterError):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


def test_mre_simple_cases():
    truth = np.array([[0.0, 0, 0, 0.1], [1.0, 0, 0, 0.9]])
    assert mean_reconstruction_error(truth, truth) == 0.0
    recon = np.array([[0.0, 0, 0.5, 0.7]])
    assert mean_reconstruction_error(recon, truth) == pytest.approx(0.5)
    # the symmetric version also counts the unmatched truth point
    expect = 0.5 * (0.5 + 0.5 * (0.5 + math.sqrt(1.25)))
    assert mean_reconstruction_error(recon, truth, symmetric=True) == pytest.approx(expect)


def test_mre_ignores_gray():
    a = np.array([[0.0, 0, 0, 0.0]])
    b = np.array([[0.0, 0, 0, 1.0]])
    assert mean_reconstruction_error(a, b) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_mre_matches_brute_force_bitwise(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 200, 4))
    assert mean_reconstruction_error(a, b) == brute_force_mre(a, b)


def test_nearest_distances_on_duplicates():
    ref = np.array([[0.0, 0, 0], [0.0, 0, 0], [3.0, 4, 0]])
    np.testing.assert_array_equal(nearest_distances(np.array([[3.0, 4, 0], [0, 0, 0]]), ref), [0, 0])


def test_mre_rejects_empty():
    with pytest.raises(EmptyDataError):
        mean_reconstruction_error(np.empty((0, 4)), np.zeros((3, 4)))


def test_memory_formulas():
    assert model_memory_bytes(1) == 60
    assert model_memory_bytes(1, "ndt_cell") == 40
    assert model_memory_bytes(0) == 0
    assert bytes_to_mb(1_000_000) == 1.0
    with pytest.raises(ParameterError):
        model_memory_bytes(3, "octree")
    with pytest.raises(ParameterError):
        model_memory_bytes(-1)


@pytest.mark.parametrize("m", [1, 7, 50])
def test_memory_matches_file_payload(m):
    model = random_model(np.random.default_rng(m), m=m)
    assert model_memory_bytes(m) == len(model_to_bytes(model, 0.02)) - HEADER_SIZE


def test_report_csv():
    buf = io.StringIO()
    write_report([{"dataset": "wall", "sigma": 0.01, "M": 12, "psnr_db": math.inf,
                   "mre_m": 0.0021, "mem_bytes": 720}], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(REPORT_FIELDS)
    assert lines[1] == "wall,0.01,12,inf,0.0021,720,"
