"""Seeded band-limited random inputs for property checks."""

from __future__ import annotations

import numpy as np

from .diffeo import CircleDiffeo
from .grid import Field, PeriodicGrid
from .msi import JetSample


def band_limited(grid: PeriodicGrid, rng: np.random.Generator, kmax: int, decay: float = 1.0,
                 amplitude: float = 1.0, zero_mean: bool = False) -> np.ndarray:
    """Random trigonometric polynomial with modes ``0..kmax`` and coefficients ~ ``k^-decay``."""
    if not 0 < kmax < grid.n // 2:
        raise ValueError(f"kmax must lie in (0, n/2), got {kmax}")
    theta = grid.x * (2.0 * np.pi / grid.length)
    out = np.zeros(grid.n) if zero_mean else np.full(grid.n, rng.normal())
    for k in range(1, kmax + 1):
        c, s = rng.normal(size=2) / k**decay
        out += c * np.cos(k * theta) + s * np.sin(k * theta)
    return amplitude * out


def band_limited_field(grid, rng, kmax, **kw) -> Field:
    return Field(grid, band_limited(grid, rng, kmax, **kw))


def random_diffeo(grid: PeriodicGrid, rng: np.random.Generator, kmax: int = 4, strength: float = 0.5) -> CircleDiffeo:
    """Smooth diffeo whose slope stays in ``[1 - strength, 1 + strength]``."""
    d = band_limited(grid, rng, kmax, decay=1.0, zero_mean=True)
    slope_dev = np.max(np.abs(grid.diff(d, 1)))
    return CircleDiffeo(grid, strength * d / slope_dev)


def random_jet(rng: np.random.Generator, shape=(), slope_range=(0.5, 2.0)) -> JetSample:
    """Independent random jet values with ``l_x`` bounded away from zero."""
    vals = [rng.normal(size=shape) for _ in range(19)]
    vals[1] = rng.uniform(*slope_range, size=shape)
    return JetSample(*vals)
