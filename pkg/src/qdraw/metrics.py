"""Structural-complexity fitness: blur, tri-level threshold, compression ratio.

Algorithmic complexity of a drawing is approximated by how poorly it
compresses after denoising: a Gaussian low-pass at a resolution-
proportional scale, quantization to three intensity classes, then a raw
DEFLATE pass over the byte buffer. Fitness is the compressed/uncompressed
ratio, clamped to the (0, 1] contract bound.
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .raster import validate_raster

# Tri-level class boundaries at 1/3 and 2/3 of the uint8 range.
THRESHOLD_LO = 85
THRESHOLD_HI = 170

# Raw DEFLATE (no zlib/gzip container), maximum effort; pinned for
# byte-stable compressed sizes.
DEFLATE_LEVEL = 9
DEFLATE_WBITS = -15


def low_pass(img, sigma: float) -> np.ndarray:
    """Gaussian blur, kernel truncated at 3 sigma, clamp-to-edge borders."""
    arr = validate_raster(img)
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    blurred = ndimage.gaussian_filter(
        arr.astype(np.float64), sigma=sigma, truncate=3.0, mode="nearest"
    )
    return np.floor(blurred + 0.5).astype(np.uint8)


def tri_threshold(img) -> np.ndarray:
    """Quantize to {0, 128, 255} with class edges at 85 and 170."""
    arr = validate_raster(img)
    out = np.full_like(arr, 128)
    out[arr < THRESHOLD_LO] = 0
    out[arr >= THRESHOLD_HI] = 255
    return out


def deflate_size(buf: bytes) -> int:
    comp = zlib.compressobj(DEFLATE_LEVEL, zlib.DEFLATED, DEFLATE_WBITS)
    return len(comp.compress(buf) + comp.flush())


def structural_complexity(img) -> float:
    """Fitness in (0, 1]: higher means the drawing resists compression."""
    arr = validate_raster(img)
    sigma = arr.shape[1] / 128.0
    quantized = tri_threshold(low_pass(arr, sigma))
    raw = quantized.tobytes()
    return min(1.0, deflate_size(raw) / len(raw))
