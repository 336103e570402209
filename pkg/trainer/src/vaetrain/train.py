"""Training loop: seeded, single-process, CPU-deterministic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import data, qdvw
from .errors import ValidationError
from .model import LATENT_DIM, ConvVAE, export_encoder_tensors, vae_loss


@dataclass(frozen=True)
class TrainSpec:
    corpus_dir: str
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-3
    latent_dim: int = LATENT_DIM
    beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim != LATENT_DIM:
            raise ValidationError(
                f"latent dim is fixed at {LATENT_DIM} by the pipeline contract, "
                f"got {self.latent_dim}"
            )
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValidationError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    recon: float
    kl: float


def train(spec: TrainSpec):
    """Fit the VAE on the corpus; returns (model, per-epoch stats).

    Determinism: fixed torch seed, deterministic algorithms, one compute
    thread, in-memory batching with a seeded shuffle. Two runs of one
    spec produce identical weights on the same platform.
    """
    corpus = data.load_corpus(spec.corpus_dir)
    torch.manual_seed(spec.seed)
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(1)

    images = torch.from_numpy(corpus.astype(np.float32) / 255.0).unsqueeze(1)
    model = ConvVAE()
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    shuffler = torch.Generator().manual_seed(spec.seed)

    n = images.shape[0]
    curve = []
    for epoch in range(1, spec.epochs + 1):
        order = torch.randperm(n, generator=shuffler)
        total_sum = recon_sum = kl_sum = 0.0
        for start in range(0, n, spec.batch_size):
            batch = images[order[start : start + spec.batch_size]]
            recon, mean, logvar = model(batch)
            loss, bce, kl = vae_loss(recon, batch, mean, logvar, spec.beta)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            weight = batch.shape[0]
            total_sum += loss.item() * weight
            recon_sum += bce.item() * weight
            kl_sum += kl.item() * weight
        curve.append(
            EpochStats(
                epoch=epoch, total=total_sum / n, recon=recon_sum / n, kl=kl_sum / n
            )
        )
    return model, curve


def curve_to_csv(curve: list) -> str:
    rows = ["epoch,total,recon,kl"]
    for s in curve:
        rows.append(f"{s.epoch},{repr(s.total)},{repr(s.recon)},{repr(s.kl)}")
    return "\n".join(rows) + "\n"


def save_weights(path, model: ConvVAE) -> None:
    qdvw.save_tensors(path, export_encoder_tensors(model))
