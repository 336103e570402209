"""Agent-based line drawing generator.

A 14-gene genome in [0,1]^14 maps affinely onto particle-system
parameters.  Particles spawn near the canvas centre, are advected through
the divergence-free flow field of `noise`, and deposit anti-aliased ink
strokes by multiplicative darkening.  Everything downstream of the
(genome, canvas_size, seed) triple is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ValidationError
from .noise import _GRADS, _cached_permutation, _curl_velocity
from .seeding import STREAM_SPAWN, child_seed

GENE_COUNT = 14

# (name, low, high, integer) per gene, in gene order.
GENE_TABLE = (
    ("agent_count", 10.0, 400.0, True),
    ("mean_lifetime", 100.0, 2000.0, True),
    ("lifetime_spread", 0.0, 0.5, False),
    ("speed", 0.5, 5.0, False),
    ("inertia", 0.0, 0.95, False),
    ("noise_scale", 0.001, 0.02, False),
    ("noise_octaves", 1.0, 4.0, True),
    ("curl_strength", 0.0, 4.0, False),
    ("field_time_rate", 0.0, 0.01, False),
    ("stroke_width", 0.5, 3.0, False),
    ("stroke_opacity", 0.05, 1.0, False),
    ("spawn_spread", 0.05, 0.5, False),
    ("bias_angle", 0.0, 2.0 * math.pi, False),
    ("bias_weight", 0.0, 0.6, False),
)


@dataclass(frozen=True)
class AgentParams:
    agent_count: int
    mean_lifetime: int
    lifetime_spread: float
    speed: float
    inertia: float
    noise_scale: float
    noise_octaves: int
    curl_strength: float
    field_time_rate: float
    stroke_width: float
    stroke_opacity: float
    spawn_spread: float
    bias_angle: float
    bias_weight: float


def validate_genome(genes) -> np.ndarray:
    """Coerce to a float64 vector; reject wrong length or out-of-range alleles."""
    arr = np.asarray(genes, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != GENE_COUNT:
        raise ValidationError(f"genome must have exactly {GENE_COUNT} genes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("genome contains non-finite alleles")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("genome alleles must lie in [0, 1]")
    return arr


def random_genome(rng: np.random.Generator) -> np.ndarray:
    return rng.random(GENE_COUNT)


def map_genome(genes) -> AgentParams:
    """Affine map of each gene onto its documented range; integer fields
    round half-up so endpoints and midpoints land exactly."""
    arr = validate_genome(genes)
    values = {}
    for gene, (name, lo, hi, integer) in zip(arr, GENE_TABLE):
        x = lo + gene * (hi - lo)
        values[name] = int(math.floor(x + 0.5)) if integer else x
    return AgentParams(**values)


def spawn_state(params: AgentParams, canvas_size: int, seed: int):
    """Initial particle state drawn from the seeded spawn stream.

    Four uniforms per particle, particle-major: spawn angle, radial
    fraction (sqrt-shaped for a uniform disc), lifetime fraction, heading
    angle.  Returns (positions (n,2), headings (n,2) unit, lifetimes (n,)).
    """
    rng = np.random.Generator(np.random.PCG64(child_seed(seed, STREAM_SPAWN)))
    n = params.agent_count
    u = rng.random((n, 4))
    centre = canvas_size / 2.0
    radius = params.spawn_spread * canvas_size
    theta = 2.0 * math.pi * u[:, 0]
    rad = radius * np.sqrt(u[:, 1])
    positions = np.stack(
        [centre + rad * np.cos(theta), centre + rad * np.sin(theta)], axis=1
    )
    lo = params.mean_lifetime * (1.0 - params.lifetime_spread)
    hi = params.mean_lifetime * (1.0 + params.lifetime_spread)
    lifetimes = np.floor(lo + u[:, 2] * (hi - lo) + 0.5).astype(np.int64)
    np.maximum(lifetimes, 1, out=lifetimes)
    phi = 2.0 * math.pi * u[:, 3]
    headings = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    return positions, headings, lifetimes


@njit(cache=True)
def _composite_segment(canvas, ax, ay, bx, by, half_w, opacity):
    """Darken pixels within half_w (+0.5 px feather) of segment AB."""
    h, w = canvas.shape
    reach = half_w + 1.0
    x_lo = int(math.floor(min(ax, bx) - reach))
    x_hi = int(math.floor(max(ax, bx) + reach))
    y_lo = int(math.floor(min(ay, by) - reach))
    y_hi = int(math.floor(max(ay, by) + reach))
    if x_lo < 0:
        x_lo = 0
    if y_lo < 0:
        y_lo = 0
    if x_hi > w - 1:
        x_hi = w - 1
    if y_hi > h - 1:
        y_hi = h - 1
    if x_lo > x_hi or y_lo > y_hi:
        return
    dx = bx - ax
    dy = by - ay
    seg2 = dx * dx + dy * dy
    for iy in range(y_lo, y_hi + 1):
        cy = iy + 0.5
        for ix in range(x_lo, x_hi + 1):
            cx = ix + 0.5
            t = ((cx - ax) * dx + (cy - ay) * dy) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            ex = cx - (ax + t * dx)
            ey = cy - (ay + t * dy)
            dist = math.sqrt(ex * ex + ey * ey)
            cov = half_w + 0.5 - dist
            if cov <= 0.0:
                continue
            if cov > 1.0:
                cov = 1.0
            canvas[iy, ix] *= 1.0 - opacity * cov

@njit(cache=True)
def _simulate(canvas, perm, grads, positions, headings, lifetimes,
              speed, inertia, noise_scale, octaves, curl_strength,
              time_rate, half_w, opacity, bias_x, bias_y, bias_weight):
    """Run every particle to the end of its life, particle-major.

    Pixel compositing is multiplicative and the loop order is fixed, so
    the output is bit-deterministic.  Field time is the particle's own
    step index.  Returns the executed step count.
    """
    total_steps = 0
    n = positions.shape[0]
    for i in range(n):
        px = positions[i, 0]
        py = positions[i, 1]
        vx = headings[i, 0]
        vy = headings[i, 1]
        dirx = vx
        diry = vy
        life = lifetimes[i]
        for t in range(life):
            fx, fy = _curl_velocity(
                perm, grads, px, py, float(t),
                noise_scale, octaves, curl_strength, time_rate,
            )
            sx = (1.0 - bias_weight) * fx + bias_weight * bias_x
            sy = (1.0 - bias_weight) * fy + bias_weight * bias_y
            vx = inertia * vx + (1.0 - inertia) * sx
            vy = inertia * vy + (1.0 - inertia) * sy
            norm = math.sqrt(vx * vx + vy * vy)
            if norm > 1e-12:
                dirx = vx / norm
                diry = vy / norm
            nx = px + speed * dirx
            ny = py + speed * diry
            _composite_segment(canvas, px, py, nx, ny, half_w, opacity)
            px = nx
            py = ny
            total_steps += 1
    return total_steps


def render_with_stats(genes, canvas_size: int, seed: int):
    """Render a genome; returns (raster uint8 HxW, executed step count)."""
    if canvas_size < 64:
        raise ValidationError(f"canvas_size must be >= 64, got {canvas_size}")
    params = map_genome(genes)
    positions, headings, lifetimes = spawn_state(params, canvas_size, seed)
    perm = _cached_permutation(seed)
    canvas = np.ones((canvas_size, canvas_size), dtype=np.float32)
    steps = _simulate(
        canvas, perm, _GRADS, positions, headings, lifetimes,
        params.speed, params.inertia, params.noise_scale,
        params.noise_octaves, params.curl_strength, params.field_time_rate,
        params.stroke_width / 2.0, params.stroke_opacity,
        math.cos(params.bias_angle), math.sin(params.bias_angle),
        params.bias_weight,
    )
    raster = np.floor(canvas.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    return raster, steps


def render(genes, canvas_size: int, seed: int) -> np.ndarray:
    """Deterministic phenotype raster (uint8, white 255, ink toward 0)."""
    raster, _ = render_with_stats(genes, canvas_size, seed)
    return raster
