"""Corpus loading: a directory of 64x64 grayscale PNGs."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import ValidationError
from .model import INPUT_SIZE


def list_corpus(corpus_dir: str) -> list:
    """Sorted paths of every PNG in the directory."""
    if not os.path.isdir(corpus_dir):
        raise ValidationError(f"corpus directory not found: {corpus_dir}")
    names = sorted(n for n in os.listdir(corpus_dir) if n.endswith(".png"))
    if not names:
        raise ValidationError(f"corpus is empty: no PNGs in {corpus_dir}")
    return [os.path.join(corpus_dir, n) for n in names]


def load_image(path: str) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.uint8)
    if arr.shape != (INPUT_SIZE, INPUT_SIZE):
        raise ValidationError(
            f"{path}: expected {INPUT_SIZE}x{INPUT_SIZE}, got {arr.shape}"
        )
    return arr


def load_corpus(corpus_dir: str) -> np.ndarray:
    """Whole corpus as one uint8 (N, 64, 64) array; it is small enough
    to keep resident (a 40,000-image corpus is ~160 MB)."""
    paths = list_corpus(corpus_dir)
    out = np.empty((len(paths), INPUT_SIZE, INPUT_SIZE), dtype=np.uint8)
    for i, path in enumerate(paths):
        out[i] = load_image(path)
    return out
