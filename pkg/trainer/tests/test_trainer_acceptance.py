"""Acceptance gate for the trainer: one test per cross-component criterion.

The module fixture does the expensive work once: a 4,000-image corpus
generated by the drawing engine's CLI, one training run, and a parity
pack export. Budget roughly 3-5 minutes single-threaded.

The engine is exercised only through its published surfaces: the corpus
CLI, the QDVW weight container, and the encode operation the parity pack
exists to check.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from vaetrain import cli, parity

CORPUS_COUNT = 4000
CORPUS_SEED = 13
TRAIN_SEED = 0
EPOCHS = 3


def _check(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("trainer_acceptance")
    corpus = root / "corpus"
    proc = subprocess.run(
        [
            sys.executable, "-m", "qdraw.cli",
            "corpus",
            "--out", str(corpus),
            "--count", str(CORPUS_COUNT),
            "--canvas", "64",
            "--seed", str(CORPUS_SEED),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    small = corpus / "small"

    run = root / "run"
    code = cli.main(
        [
            "train",
            "--corpus", str(small),
            "--out", str(run),
            "--epochs", str(EPOCHS),
            "--batch-size", "128",
            "--seed", str(TRAIN_SEED),
        ]
    )
    assert code == 0
    code = cli.main(
        [
            "export-parity",
            "--weights", str(run / "encoder.qdvw"),
            "--corpus", str(small),
            "--out", str(root / "pack"),
        ]
    )
    assert code == 0
    return root


def test_s01_weight_format_round_trip(workspace):
    """Trainer-exported weights load in the engine with zero shape errors."""
    from qdraw import embedding
    from qdraw.errors import ValidationError

    try:
        weights = embedding.load_weights(workspace / "run" / "encoder.qdvw")
        problem = ""
    except ValidationError as err:
        weights = {}
        problem = str(err)
    _check(
        "weight round trip",
        problem == "" and len(weights) == 12,
        f"12 validated tensors expected, got {len(weights)}, error={problem!r}",
    )


def test_s02_encoder_parity(workspace):
    """Engine-side encode matches the trainer's CSV within 1e-4 relative."""
    from qdraw import embedding

    weights = embedding.load_weights(workspace / "run" / "encoder.qdvw")
    names, ref = parity.load_parity_csv(workspace / "pack" / parity.CSV_NAME)
    worst = 0.0
    for name, vec in zip(names, ref):
        img = np.asarray(Image.open(workspace / "pack" / name).convert("L"))
        latent = embedding.encode(img, weights)
        rel = float(np.linalg.norm(latent - vec) / np.linalg.norm(vec))
        worst = max(worst, rel)
    _check(
        "encoder parity",
        len(names) == 32 and worst < 1e-4,
        f"32 pairs, worst relative error {worst:.3e} (tolerance 1e-4)",
    )


def test_s03_training_sanity(workspace):
    """Final-epoch total loss beats the first epoch on the 4,000-image corpus."""
    lines = (workspace / "run" / "curve.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,total,recon,kl"
    rows = [line.split(",") for line in lines[1:]]
    totals = [float(r[1]) for r in rows]
    count = len(list((workspace / "corpus" / "small").glob("*.png")))
    _check(
        "training sanity",
        count == CORPUS_COUNT and len(totals) == EPOCHS and totals[-1] < totals[0],
        f"corpus {count}, epoch 1 total {totals[0]:.2f} -> "
        f"epoch {len(totals)} total {totals[-1]:.2f}",
    )
