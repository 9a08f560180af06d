"""Reproducible random streams.

All randomness goes through numpy's Philox-4x64 counter-based bit generator,
keyed by ``(seed, stream)`` through a ``SeedSequence``. Uniform doubles come
from ``Generator.random`` (53-bit mantissa), which is platform independent.
Normal deviates are produced from those uniforms with the Box-Muller
transform and Poisson deviates by sequential CDF inversion, so no
platform-specific sampling routine is ever involved.
"""

import numpy as np

from .errors import InvalidParameterError

# Named sub-streams, so that e.g. sensor noise never shifts the state noise.
STATE = 0
BURST = 1
SENSOR = 2
AUX = 3


def make_rng(seed, stream=STATE):
    if seed < 0 or seed >= 2**64:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal(rng, shape):
    """Box-Muller normals: ``sqrt(-2 ln u1) * (cos, sin)(2 pi u2)``."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    size = int(np.prod(shape)) if shape else 1
    half = (size + 1) // 2
    u = rng.random((2, half))
    r = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u in (0, 1]
    ang = 2.0 * np.pi * u[1]
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:size].reshape(shape)


def poisson(rng, rate):
    """Poisson deviates by inversion of the CDF, one uniform per draw."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0) or not np.all(np.isfinite(rate)):
        raise InvalidParameterError("Poisson rate must be finite and >= 0")
    if np.any(rate > 500):
        raise InvalidParameterError("Poisson rate above 500 is not supported by inversion")
    u = rng.random(rate.shape)
    k = np.zeros(rate.shape, dtype=np.int64)
    p = np.exp(-rate)
    cdf = p.copy()
    active = u > cdf
    n = 0
    while np.any(active):
        n += 1
        p = np.where(active, p * rate / n, p)
        cdf = np.where(active, cdf + p, cdf)
        k = np.where(active, n, k)
        # guard against cdf stalling below u through rounding
        active = active & (u > cdf) & (p > 0)
    return k
