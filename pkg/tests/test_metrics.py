"""Structural-complexity metric tests with hand-computed oracles."""

import numpy as np
import pytest

from qdraw import metrics
from qdraw.errors import ValidationError


def test_blur_of_uniform_is_identity():
    img = np.full((64, 64), 77, dtype=np.uint8)
    assert np.array_equal(metrics.low_pass(img, 1.0), img)


def _hand_kernel(sigma: float) -> np.ndarray:
    # normalized 1-D Gaussian sampled at integer offsets, radius 3*sigma
    radius = int(3.0 * sigma + 0.5)
    offsets = np.arange(-radius, radius + 1)
    w = np.exp(-0.5 * (offsets / sigma) ** 2)
    return w / w.sum()


def test_blur_single_pixel_matches_hand_kernel():
    # white pixel on black, sigma=1: the 7x7 separable kernel's weights
    # give the response at the centre and its neighbour exactly
    img = np.zeros((15, 15), dtype=np.uint8)
    img[7, 7] = 255
    out = metrics.low_pass(img, 1.0)
    k = _hand_kernel(1.0)
    assert len(k) == 7
    centre = int(np.floor(255.0 * k[3] * k[3] + 0.5))
    neighbour = int(np.floor(255.0 * k[3] * k[2] + 0.5))
    assert out[7, 7] == centre
    assert out[7, 6] == neighbour and out[6, 7] == neighbour


def test_blur_conserves_interior_intensity():
    rng = np.random.default_rng(3)
    img = np.zeros((96, 96), dtype=np.uint8)
    img[20:-20, 20:-20] = rng.integers(0, 256, (56, 56), dtype=np.uint8)
    out = metrics.low_pass(img, 2.0)
    total_in = float(img.sum())
    total_out = float(out.sum())
    assert abs(total_out - total_in) / total_in < 0.005


def test_blur_rejects_bad_sigma():
    img = np.zeros((8, 8), dtype=np.uint8)
    with pytest.raises(ValidationError):
        metrics.low_pass(img, 0.0)
    with pytest.raises(ValidationError):
        metrics.low_pass(img, -1.0)


def test_tri_threshold_class_edges():
    img = np.array([[40, 100, 200]], dtype=np.uint8)
    assert metrics.tri_threshold(img).tolist() == [[0, 128, 255]]
    edges = np.array([[84, 85, 169, 170]], dtype=np.uint8)
    assert metrics.tri_threshold(edges).tolist() == [[0, 128, 128, 255]]


def test_tri_threshold_idempotent():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    once = metrics.tri_threshold(img)
    assert np.array_equal(metrics.tri_threshold(once), once)


def test_tri_threshold_uniform_zero():
    img = np.zeros((16, 16), dtype=np.uint8)
    assert np.array_equal(metrics.tri_threshold(img), img)


def test_blank_compresses_below_one_percent():
    blank = np.full((256, 256), 255, dtype=np.uint8)
    assert metrics.structural_complexity(blank) < 0.01


def test_noise_beats_blank():
    rng = np.random.default_rng(11)
    noisy = rng.integers(0, 256, (256, 256), dtype=np.uint8)
    blank = np.full((256, 256), 255, dtype=np.uint8)
    assert metrics.structural_complexity(noisy) > metrics.structural_complexity(blank)


def test_fitness_in_unit_interval():
    rng = np.random.default_rng(13)
    for img in (
        np.zeros((64, 64), dtype=np.uint8),
        rng.integers(0, 256, (64, 64), dtype=np.uint8),
        np.full((64, 64), 128, dtype=np.uint8),
    ):
        v = metrics.structural_complexity(img)
        assert 0.0 < v <= 1.0


def test_compressed_sizes_deterministic():
    rng = np.random.default_rng(17)
    img = rng.integers(0, 256, (128, 128), dtype=np.uint8)
    buf = metrics.tri_threshold(metrics.low_pass(img, 1.0)).tobytes()
    assert metrics.deflate_size(buf) == metrics.deflate_size(buf)
    assert metrics.structural_complexity(img) == metrics.structural_complexity(img)


def test_half_plane_beats_blank():
    # blurred boundary content sits between blank and noise
    img = np.full((256, 256), 255, dtype=np.uint8)
    img[:, :128] = 0
    blank = np.full((256, 256), 255, dtype=np.uint8)
    assert metrics.structural_complexity(img) > metrics.structural_complexity(blank)
