"""Convolutional VAE over 64x64 grayscale drawings.

The encoder half is the consumer-facing contract: four 3x3 stride-2
padding-1 convolutions (channels 16/32/64/128, ReLU), flattened in
(C, H, W) order to 2048, then parallel 512-wide mean and log-variance
heads. The decoder mirrors it with nearest-neighbour upsampling and
exists only for training.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import ValidationError

LATENT_DIM = 512
INPUT_SIZE = 64

# consumer's expected tensor names -> shapes; export must match exactly
ENCODER_SHAPES = {
    "conv1.weight": (16, 1, 3, 3),
    "conv1.bias": (16,),
    "conv2.weight": (32, 16, 3, 3),
    "conv2.bias": (32,),
    "conv3.weight": (64, 32, 3, 3),
    "conv3.bias": (64,),
    "conv4.weight": (128, 64, 3, 3),
    "conv4.bias": (128,),
    "fc_mean.weight": (512, 2048),
    "fc_mean.bias": (512,),
    "fc_logvar.weight": (512, 2048),
    "fc_logvar.bias": (512,),
}


class Encoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(32, 64, 3, stride=2, padding=1)
        self.conv4 = nn.Conv2d(64, 128, 3, stride=2, padding=1)
        self.fc_mean = nn.Linear(128 * 4 * 4, LATENT_DIM)
        self.fc_logvar = nn.Linear(128 * 4 * 4, LATENT_DIM)

    def forward(self, x: torch.Tensor):
        h = torch.relu(self.conv1(x))
        h = torch.relu(self.conv2(h))
        h = torch.relu(self.conv3(h))
        h = torch.relu(self.conv4(h))
        h = h.flatten(1)
        return self.fc_mean(h), self.fc_logvar(h)


class Decoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.fc = nn.Linear(LATENT_DIM, 128 * 4 * 4)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv1 = nn.Conv2d(128, 64, 3, padding=1)
        self.conv2 = nn.Conv2d(64, 32, 3, padding=1)
        self.conv3 = nn.Conv2d(32, 16, 3, padding=1)
        self.conv4 = nn.Conv2d(16, 1, 3, padding=1)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.fc(z)).reshape(-1, 128, 4, 4)
        h = torch.relu(self.conv1(self.up(h)))
        h = torch.relu(self.conv2(self.up(h)))
        h = torch.relu(self.conv3(self.up(h)))
        return torch.sigmoid(self.conv4(self.up(h)))


class ConvVAE(nn.Module):
    def __init__(self):
        super().__init__()
        self.encoder = Encoder()
        self.decoder = Decoder()

    def forward(self, x: torch.Tensor):
        mean, logvar = self.encoder(x)
        std = torch.exp(0.5 * logvar)
        z = mean + std * torch.randn_like(std)
        return self.decoder(z), mean, logvar


def vae_loss(recon, x, mean, logvar, beta: float):
    """Per-sample-mean BCE-sum reconstruction plus beta-weighted KL."""
    bce = nn.functional.binary_cross_entropy(recon, x, reduction="sum") / x.shape[0]
    kl = -0.5 * torch.sum(1 + logvar - mean.pow(2) - logvar.exp()) / x.shape[0]
    return bce + beta * kl, bce, kl


def export_encoder_tensors(model: ConvVAE) -> dict:
    """Encoder state as numpy arrays under the consumer's tensor names."""
    out = {}
    state = model.encoder.state_dict()
    for name, shape in ENCODER_SHAPES.items():
        tensor = state[name].detach().cpu().numpy()
        if tensor.shape != shape:
            raise AssertionError(f"{name} has shape {tensor.shape}, expected {shape}")
        out[name] = tensor
    return out


def import_encoder_tensors(tensors: dict) -> Encoder:
    """Encoder rebuilt from exported arrays; extra tensor names are ignored."""
    state = {}
    for name, shape in ENCODER_SHAPES.items():
        if name not in tensors:
            raise ValidationError(f"weight file is missing tensor {name}")
        arr = np.asarray(tensors[name], dtype=np.float32)
        if arr.shape != shape:
            raise ValidationError(
                f"tensor {name} has shape {tuple(arr.shape)}, expected {shape}"
            )
        state[name] = torch.from_numpy(np.ascontiguousarray(arr))
    encoder = Encoder()
    encoder.load_state_dict(state)
    encoder.eval()
    return encoder
