"""Parity pack export: reference images paired with trainer-side latents.

The pack is the cross-component oracle. The consuming engine encodes the
PNGs with its own forward pass and checks against the CSV, so every value
here must come from the trainer's stack, not the consumer's.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
import torch

from . import data, qdvw
from .errors import ValidationError
from .model import LATENT_DIM, import_encoder_tensors

PACK_SIZE = 32
CSV_NAME = "latents.csv"


def export_parity(weights_path, corpus_dir, out_dir) -> Path:
    """Write PACK_SIZE corpus images plus a CSV of their mean-head latents.

    Images are the first PACK_SIZE of the corpus in sorted-name order,
    copied byte for byte. Returns the path of the CSV.
    """
    paths = data.list_corpus(corpus_dir)
    if len(paths) < PACK_SIZE:
        raise ValidationError(
            f"parity pack needs {PACK_SIZE} corpus images, found {len(paths)}"
        )
    paths = paths[:PACK_SIZE]
    encoder = import_encoder_tensors(qdvw.load_tensors(weights_path))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with torch.no_grad():
        for index, src in enumerate(paths):
            name = f"sample_{index:03d}.png"
            shutil.copyfile(src, out / name)
            pixels = data.load_image(src).astype(np.float32) / 255.0
            batch = torch.from_numpy(pixels).reshape(1, 1, *pixels.shape)
            mean, _ = encoder(batch)
            latent = mean[0].numpy()
            if latent.shape != (LATENT_DIM,):
                raise AssertionError(f"latent shape {latent.shape}")
            rows.append(name + "," + ",".join(repr(float(v)) for v in latent))

    csv_path = out / CSV_NAME
    header = "image," + ",".join(f"v{i:03d}" for i in range(LATENT_DIM))
    csv_path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return csv_path


def load_parity_csv(csv_path):
    """Parse a pack CSV into (image names, float32 latents of shape N×512)."""
    lines = Path(csv_path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("image,"):
        raise ValidationError(f"{csv_path}: not a parity CSV")
    names = []
    vectors = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 1 + LATENT_DIM:
            raise ValidationError(
                f"{csv_path}: expected {1 + LATENT_DIM} columns, got {len(cells)}"
            )
        names.append(cells[0])
        vectors.append([float(c) for c in cells[1:]])
    return names, np.asarray(vectors, dtype=np.float32)
