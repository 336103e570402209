"""Seeded gradient noise and the divergence-free flow field built on it.

The velocity field is the curl of a scalar potential made of stacked
octaves of 3-D Perlin-style gradient noise (x, y, animated time), in the
spirit of procedural curl noise.  The curl is taken by central
differences of the potential with a fixed 0.1 px step: the mixed-partial
stencils of a same-step divergence check then cancel term by term, so
the discrete field is divergence-free to float roundoff for every
parameter setting, not just asymptotically.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from numba import njit

from .seeding import STREAM_NOISE, child_seed

# Differencing step (px) for the curl; also the step a central-difference
# divergence check must use for exact stencil cancellation.
CURL_STEP = 0.1

# Classic 16-entry gradient set (12 edge directions + 4 repeats).
_GRADS = np.array(
    [
        [1, 1, 0], [-1, 1, 0], [1, -1, 0], [-1, -1, 0],
        [1, 0, 1], [-1, 0, 1], [1, 0, -1], [-1, 0, -1],
        [0, 1, 1], [0, -1, 1], [0, 1, -1], [0, -1, -1],
        [1, 1, 0], [0, -1, 1], [-1, 1, 0], [0, -1, -1],
    ],
    dtype=np.float64,
)


def permutation_table(seed: int) -> np.ndarray:
    """256-entry permutation for a seed, doubled to 512 to avoid wrapping."""
    rng = np.random.Generator(np.random.PCG64(child_seed(seed, STREAM_NOISE)))
    perm = rng.permutation(256)
    return np.concatenate([perm, perm]).astype(np.int64)


@functools.lru_cache(maxsize=64)
def _cached_permutation(seed: int) -> np.ndarray:
    table = permutation_table(seed)
    table.setflags(write=False)
    return table


@njit(cache=True, inline="always")
def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


@njit(cache=True, inline="always")
def _noise3(perm, grads, x, y, z):
    """One octave of 3-D gradient noise, scalar arithmetic only."""
    xi = math.floor(x)
    yi = math.floor(y)
    zi = math.floor(z)
    xf = x - xi
    yf = y - yi
    zf = z - zi
    xc = int(xi) & 255
    yc = int(yi) & 255
    zc = int(zi) & 255

    u = _fade(xf)
    v = _fade(yf)
    w = _fade(zf)

    a = perm[xc] + yc
    b = perm[xc + 1] + yc
    h000 = perm[perm[a] + zc] & 15
    h010 = perm[perm[a + 1] + zc] & 15
    h001 = perm[perm[a] + zc + 1] & 15
    h011 = perm[perm[a + 1] + zc + 1] & 15
    h100 = perm[perm[b] + zc] & 15
    h110 = perm[perm[b + 1] + zc] & 15
    h101 = perm[perm[b] + zc + 1] & 15
    h111 = perm[perm[b + 1] + zc + 1] & 15

    xm = xf - 1.0
    ym = yf - 1.0
    zm = zf - 1.0
    n000 = grads[h000, 0] * xf + grads[h000, 1] * yf + grads[h000, 2] * zf
    n100 = grads[h100, 0] * xm + grads[h100, 1] * yf + grads[h100, 2] * zf
    n010 = grads[h010, 0] * xf + grads[h010, 1] * ym + grads[h010, 2] * zf
    n110 = grads[h110, 0] * xm + grads[h110, 1] * ym + grads[h110, 2] * zf
    n001 = grads[h001, 0] * xf + grads[h001, 1] * yf + grads[h001, 2] * zm
    n101 = grads[h101, 0] * xm + grads[h101, 1] * yf + grads[h101, 2] * zm
    n011 = grads[h011, 0] * xf + grads[h011, 1] * ym + grads[h011, 2] * zm
    n111 = grads[h111, 0] * xm + grads[h111, 1] * ym + grads[h111, 2] * zm

    x00 = n000 + u * (n100 - n000)
    x10 = n010 + u * (n110 - n010)
    x01 = n001 + u * (n101 - n001)
    x11 = n011 + u * (n111 - n011)
    y0 = x00 + v * (x10 - x00)
    y1 = x01 + v * (x11 - x01)
    return y0 + w * (y1 - y0)


@njit(cache=True, inline="always")
def _potential(perm, grads, x, y, z, scale, octaves):
    """Multi-octave noise potential, normalized by total amplitude.

    Octave o runs at spatial frequency scale*2^o with amplitude 2^-o.
    """
    total = 0.0
    amp_total = 0.0
    freq = 1.0
    amp = 1.0
    for _ in range(octaves):
        total += amp * _noise3(perm, grads, x * scale * freq, y * scale * freq, z * freq)
        amp_total += amp
        freq *= 2.0
        amp *= 0.5
    return total / amp_total


@njit(cache=True)
def _curl_velocity(perm, grads, x, y, t, scale, octaves, strength, time_rate):
    """Velocity (vx, vy) = (dpsi/dy, -dpsi/dx) by central differences.

    The potential carries a strength/scale prefactor so velocity
    magnitudes stay O(strength) regardless of the base frequency.
    """
    if strength == 0.0:
        return 0.0, 0.0
    z = t * time_rate
    h = CURL_STEP
    gain = strength / (scale * 2.0 * h)
    py1 = _potential(perm, grads, x, y + h, z, scale, octaves)
    py0 = _potential(perm, grads, x, y - h, z, scale, octaves)
    px1 = _potential(perm, grads, x + h, y, z, scale, octaves)
    px0 = _potential(perm, grads, x - h, y, z, scale, octaves)
    return (py1 - py0) * gain, -(px1 - px0) * gain


def flow_velocity(pos, time: float, params, seed: int) -> np.ndarray:
    """Flow-field velocity at a point; deterministic in all arguments.

    `params` is an AgentParams (duck-typed: needs noise_scale,
    noise_octaves, curl_strength, field_time_rate).
    """
    perm = _cached_permutation(seed)
    vx, vy = _curl_velocity(
        perm,
        _GRADS,
        float(pos[0]),
        float(pos[1]),
        float(time),
        params.noise_scale,
        params.noise_octaves,
        params.curl_strength,
        params.field_time_rate,
    )
    return np.array([vx, vy])
