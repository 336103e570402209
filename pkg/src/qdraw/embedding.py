"""Phenotype feature space: encoder inference, PCA, t-SNE, out-of-sample map.

The fixed encoder (weights trained elsewhere, loaded from a QDVW file)
takes a 64x64 grayscale drawing to a 512-D latent. A corpus of latents
is reduced to 50-D by PCA and to a 2-D layout by exact t-SNE; the layout
is min-max normalized to the unit square. Phenotypes created after the
corpus is frozen are placed by inverse-distance interpolation over their
nearest corpus neighbours in PCA space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qdvw
from .errors import ValidationError
from .raster import validate_raster

INPUT_SIZE = 64
LATENT_DIM = 512
PCA_DIM = 50

# name -> shape of every tensor the encoder needs; fc_logvar is part of
# the trained model and must be present even though inference only uses
# the mean head.
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

_CONV_LAYERS = ("conv1", "conv2", "conv3", "conv4")

# Reserved tensor names for a persisted corpus embedding.
_CORPUS_PREFIX = "corpus."


def validate_weights(tensors: dict) -> dict:
    """Check presence, exact shape, and finiteness of every encoder tensor."""
    weights = {}
    for name, shape in ENCODER_SHAPES.items():
        if name not in tensors:
            raise ValidationError(f"weights missing tensor '{name}'")
        arr = np.asarray(tensors[name], dtype=np.float32)
        if arr.shape != shape:
            raise ValidationError(
                f"tensor '{name}' has shape {arr.shape}, expected {shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"tensor '{name}' contains non-finite values")
        weights[name] = arr
    return weights


def load_weights(path) -> dict:
    return validate_weights(qdvw.load_tensors(path))


def random_weights(seed: int) -> dict:
    """Untrained stub weights with fan-in scaling; valid QDVW content."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tensors = {}
    for name, shape in ENCODER_SHAPES.items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            tensors[name] = (rng.standard_normal(shape) * std).astype(np.float32)
    return tensors


def _conv_stride2(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 stride-2 pad-1 convolution on (N, C, H, W) via im2col."""
    n, c, h, w = x.shape
    out_c = weight.shape[0]
    oh, ow = h // 2, w // 2
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))
    windows = windows[:, :, ::2, ::2]  # (N, C, oh, ow, 3, 3)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * 9)
    flat = cols @ weight.reshape(out_c, c * 9).T + bias
    return flat.reshape(n, oh, ow, out_c).transpose(0, 3, 1, 2)


def encode_batch(imgs: np.ndarray, weights: dict) -> np.ndarray:
    """Mean-head latents for a (N, 64, 64) uint8 batch; float32 (N, 512)."""
    arr = np.asarray(imgs)
    if arr.ndim != 3 or arr.shape[1:] != (INPUT_SIZE, INPUT_SIZE):
        raise ValidationError(
            f"expected (N, {INPUT_SIZE}, {INPUT_SIZE}) batch, got {arr.shape}"
        )
    if arr.dtype != np.uint8:
        raise ValidationError(f"encoder input must be uint8, got {arr.dtype}")
    x = (arr.astype(np.float32) / np.float32(255.0))[:, None, :, :]
    out = np.empty((arr.shape[0], LATENT_DIM), dtype=np.float32)
    for start in range(0, arr.shape[0], 256):
        chunk = x[start : start + 256]
        for layer in _CONV_LAYERS:
            chunk = _conv_stride2(
                chunk, weights[f"{layer}.weight"], weights[f"{layer}.bias"]
            )
            chunk = np.maximum(chunk, np.float32(0.0))
        flat = chunk.reshape(chunk.shape[0], -1)  # (n, 2048) in C,H,W order
        out[start : start + 256] = flat @ weights["fc_mean.weight"].T + weights["fc_mean.bias"]
    return out


def encode(img: np.ndarray, weights: dict) -> np.ndarray:
    """512-D latent of one 64x64 drawing (deterministic mean head)."""
    arr = validate_raster(img)
    if arr.shape != (INPUT_SIZE, INPUT_SIZE):
        raise ValidationError(f"encoder input must be 64x64, got {arr.shape}")
    return encode_batch(arr[None], weights)[0]


# ----------------------------------------------------------------- PCA

@dataclass(frozen=True)
class PCAFit:
    mean: np.ndarray  # (512,)
    basis: np.ndarray  # (50, 512), rows orthonormal

    def project(self, latents: np.ndarray) -> np.ndarray:
        x = np.asarray(latents, dtype=np.float64)
        return (x - self.mean) @ self.basis.T


def fit_pca(latents: np.ndarray) -> PCAFit:
    """Top-50 principal axes by covariance eigendecomposition.

    Sign convention: each component's largest-magnitude coefficient is
    positive, removing eigenvector sign ambiguity.
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != LATENT_DIM:
        raise ValidationError(f"latents must be (N, {LATENT_DIM}), got {x.shape}")
    n = x.shape[0]
    if n < PCA_DIM + 1:
        raise ValidationError(f"PCA needs at least {PCA_DIM + 1} latents, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:PCA_DIM]
    basis = eigvecs[:, order].T.copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PCAFit(mean=mean, basis=basis)


# --------------------------------------------------------------- t-SNE

def _perplexity_affinities(dist2: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-stochastic conditional affinities calibrated to the perplexity."""
    n = dist2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        row = np.delete(dist2[i], i)
        beta_lo, beta_hi = 0.0, np.inf
        beta = 1.0
        for _ in range(64):
            ex = np.exp(-row * beta)
            total = ex.sum()
            if total <= 0:
                entropy = 0.0
            else:
                q = ex / total
                nz = q > 0
                entropy = -np.sum(q[nz] * np.log(q[nz]))
            if abs(entropy - target) < 1e-7:
                break
            if entropy > target:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2.0
        ex = np.exp(-row * beta)
        q = ex / ex.sum()
        p[i, np.arange(n) != i] = q
    return p


def _kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def fit_tsne(
    points: np.ndarray,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
    return_kl: bool = False,
):
    """Exact t-SNE to 2-D.

    Early exaggeration x12 for the first 250 iterations, learning rate
    N/12, momentum 0.5 then 0.8 from iteration 250; the KL trace (every
    50 iterations once exaggeration ends) is returned when asked.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"t-SNE input must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n <= 3 * perplexity:
        raise ValidationError(f"t-SNE needs N > 3*perplexity, got N={n}")
    if iters < 250:
        raise ValidationError(f"t-SNE needs at least 250 iterations, got {iters}")
    sq = (x * x).sum(axis=1)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    if dist2.max() <= 0:
        raise ValidationError("t-SNE input is degenerate: all points identical")

    cond = _perplexity_affinities(dist2, perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.Generator(np.random.PCG64(seed))
    y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros_like(y)
    lr = n / 12.0
    exaggeration_end = 250
    kl_trace = []

    for it in range(iters):
        p_eff = p * 12.0 if it < exaggeration_end else p
        ysq = (y * y).sum(axis=1)
        num = 1.0 / (1.0 + ysq[:, None] + ysq[None, :] - 2.0 * (y @ y.T))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (p_eff - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        momentum = 0.5 if it < exaggeration_end else 0.8
        velocity = momentum * velocity - lr * grad
        y = y + velocity
        if it >= exaggeration_end and (it + 1) % 50 == 0:
            kl_trace.append((it + 1, _kl_divergence(p, q)))
    y = y - y.mean(axis=0)
    return (y, kl_trace) if return_kl else y


def normalize_map(points: np.ndarray):
    """Min-max normalize each dimension to [0,1]; returns (norm, min, max)."""
    x = np.asarray(points, dtype=np.float64)
    mins = x.min(axis=0)
    maxs = x.max(axis=0)
    if np.any(maxs <= mins):
        raise ValidationError("cannot normalize: a dimension has zero range")
    return (x - mins) / (maxs - mins), mins, maxs


# ------------------------------------------------- corpus embedding

@dataclass(frozen=True)
class CorpusEmbedding:
    pca_mean: np.ndarray  # (512,)
    pca_basis: np.ndarray  # (50, 512)
    corpus_pca: np.ndarray  # (N, 50)
    corpus_map: np.ndarray  # (N, 2) raw t-SNE layout
    norm_min: np.ndarray  # (2,)
    norm_max: np.ndarray  # (2,)

    @property
    def size(self) -> int:
        return self.corpus_pca.shape[0]

    def map_positions(self) -> np.ndarray:
        """Normalized corpus layout in [0,1]^2.

        Clipped: a container round trip stores float32, which can push
        extreme points a few ulps past the stored min/max.
        """
        span = self.norm_max - self.norm_min
        return np.clip((self.corpus_map - self.norm_min) / span, 0.0, 1.0)

    def project(self, latent: np.ndarray) -> np.ndarray:
        return (np.asarray(latent, dtype=np.float64) - self.pca_mean) @ self.pca_basis.T


def build_corpus_embedding(
    latents: np.ndarray,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
) -> CorpusEmbedding:
    """PCA + t-SNE + normalization over a corpus of 512-D latents."""
    pca = fit_pca(latents)
    reduced = pca.project(latents)
    layout = fit_tsne(reduced, perplexity=perplexity, iters=iters, seed=seed)
    _, mins, maxs = normalize_map(layout)
    return CorpusEmbedding(
        pca_mean=pca.mean,
        pca_basis=pca.basis,
        corpus_pca=reduced,
        corpus_map=layout,
        norm_min=mins,
        norm_max=maxs,
    )


def embed_new(latent: np.ndarray, corpus: CorpusEmbedding, m: int = 5) -> np.ndarray:
    """Place a new latent in the fixed layout.

    Inverse-distance weights over the m nearest corpus points in 50-D
    PCA space; an exact corpus match returns that point's stored
    position. Output clamped to the unit square.
    """
    if corpus.size == 0:
        raise ValidationError("corpus embedding is empty")
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    coord = corpus.project(latent)
    dists = np.sqrt(((corpus.corpus_pca - coord) ** 2).sum(axis=1))
    m = min(m, corpus.size)
    order = np.argsort(dists, kind="stable")[:m]
    positions = corpus.map_positions()[order]
    near = dists[order]
    if near[0] == 0.0:
        return positions[0].copy()
    weights = 1.0 / (near + 1e-9)
    pos = (weights[:, None] * positions).sum(axis=0) / weights.sum()
    return np.clip(pos, 0.0, 1.0)


def save_corpus(path, emb: CorpusEmbedding) -> None:
    qdvw.save_tensors(
        path,
        {
            _CORPUS_PREFIX + "pca_mean": emb.pca_mean,
            _CORPUS_PREFIX + "pca_basis": emb.pca_basis,
            _CORPUS_PREFIX + "pca": emb.corpus_pca,
            _CORPUS_PREFIX + "map": emb.corpus_map,
            _CORPUS_PREFIX + "norm_min": emb.norm_min,
            _CORPUS_PREFIX + "norm_max": emb.norm_max,
        },
    )


def load_corpus(path) -> CorpusEmbedding:
    tensors = qdvw.load_tensors(path)
    fields = {}
    for key in ("pca_mean", "pca_basis", "pca", "map", "norm_min", "norm_max"):
        name = _CORPUS_PREFIX + key
        if name not in tensors:
            raise ValidationError(f"corpus container missing tensor '{name}'")
        fields[key] = tensors[name].astype(np.float64)
    return CorpusEmbedding(
        pca_mean=fields["pca_mean"],
        pca_basis=fields["pca_basis"],
        corpus_pca=fields["pca"],
        corpus_map=fields["map"],
        norm_min=fields["norm_min"],
        norm_max=fields["norm_max"],
    )
