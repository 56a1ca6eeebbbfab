"""Diffusion of the spectator Bloch vector over its polar angle.

The polar angle x starts at pi (dark pole, fidelity F(x) = (1 - cos x)/2 = 1)
and spreads with dimensionless time dt = D t = 2 C N.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

logger = logging.getLogger(__name__)

SERIES_TOLERANCE = 1e-12
MAX_SERIES_TERMS = 10_000
WRAPPED_GAUSSIAN_BELOW = 0.05
GAUSSIAN_IMAGES = 3


def _series_terms(dt: float, tolerance: float, max_terms: int) -> int:
    if dt == 0:
        return max_terms
    # next term e^{-dt m^2} falls below tolerance relative to the 1/(2 pi) floor
    needed = int(np.ceil(np.sqrt(-np.log(tolerance / 2.0) / dt)))
    return max(1, min(max_terms, needed))


def diffusion_density(
    angle: ArrayLike, dt: float, *, tolerance: float = SERIES_TOLERANCE, max_terms: int = MAX_SERIES_TERMS
) -> np.ndarray | float:
    """Probability density of the polar angle on [0, 2 pi) after diffusion time dt.

    Small positive dt uses the wrapped Gaussian of variance 2 dt around pi;
    otherwise the cosine series 1/(2 pi) + (1/pi) sum exp(-dt m^2) (-1)^m cos(m x).
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    x = np.asarray(angle, dtype=float)
    if 0 < dt < WRAPPED_GAUSSIAN_BELOW:
        shifts = 2 * np.pi * np.arange(-GAUSSIAN_IMAGES, GAUSSIAN_IMAGES + 1)
        offsets = x[..., None] - np.pi - shifts
        return np.sum(np.exp(-(offsets**2) / (4 * dt)), axis=-1) / np.sqrt(4 * np.pi * dt)

    m = np.arange(1, _series_terms(dt, tolerance, max_terms) + 1)
    weights = np.exp(-dt * m.astype(float) ** 2) * np.where(m % 2 == 0, 1.0, -1.0)
    return 1 / (2 * np.pi) + np.cos(x[..., None] * m) @ weights / np.pi


def mean_fidelity(dt: float, grid_points: int = 4096) -> float:
    """Numerical average of (1 - cos x)/2 over the density; closed form is (1 + e^{-dt})/2."""
    x = 2 * np.pi * np.arange(grid_points) / grid_points
    return float(2 * np.pi * np.mean(diffusion_density(x, dt) * 0.5 * (1 - np.cos(x))))


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float
    walkers: int


def random_walk_oracle(c_per_step: float, n: int, walkers: int, seed: int) -> OracleEstimate:
    """Random walk of unit Bloch vectors from the pole by steps of angle 2 sqrt(C).

    Every step rotates each walker about an independent random axis in the
    x-y plane. Fidelity is (1 + s_z)/2.
    """
    if not 0 <= c_per_step < 0.25:
        raise ValueError("c_per_step must lie in [0, 0.25)")
    if n < 0 or walkers < 1:
        raise ValueError("n must be >= 0 and walkers >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    step = 2 * np.sqrt(c_per_step)
    cos_step, sin_step = np.cos(step), np.sin(step)
    s = np.zeros((walkers, 3))
    s[:, 2] = 1.0
    for _ in range(n):
        azimuth = rng.uniform(0.0, 2 * np.pi, size=walkers)
        axis = np.stack([np.cos(azimuth), np.sin(azimuth), np.zeros(walkers)], axis=1)
        # Rodrigues rotation
        along = np.sum(axis * s, axis=1, keepdims=True)
        s = s * cos_step + np.cross(axis, s) * sin_step + axis * along * (1 - cos_step)
    fidelity = 0.5 * (1 + s[:, 2])
    stderr = float(fidelity.std(ddof=1) / np.sqrt(walkers)) if walkers > 1 else 0.0
    logger.debug("random walk C=%.3g N=%d walkers=%d: F=%.6f", c_per_step, n, walkers, fidelity.mean())
    return OracleEstimate(mean=float(fidelity.mean()), stderr=stderr, walkers=walkers)
