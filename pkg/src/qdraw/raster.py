"""Grayscale raster I/O and resampling helpers."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ValidationError


def validate_raster(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValidationError(f"raster must be 2-D single channel, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValidationError(f"raster must be uint8, got {arr.dtype}")
    return arr


def save_png(img, path) -> None:
    arr = validate_raster(img)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def downsample_area(img, out_size: int) -> np.ndarray:
    """Area-average downsample by an integer factor, round half-up."""
    arr = validate_raster(img)
    h, w = arr.shape
    if h != w:
        raise ValidationError(f"downsample expects a square raster, got {arr.shape}")
    if out_size < 1 or h % out_size != 0:
        raise ValidationError(f"size {h} is not an integer multiple of {out_size}")
    f = h // out_size
    if f == 1:
        return arr.copy()
    blocks = arr.reshape(out_size, f, out_size, f).astype(np.float64)
    means = blocks.mean(axis=(1, 3))
    return np.floor(means + 0.5).astype(np.uint8)
