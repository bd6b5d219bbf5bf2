"""Orientation-preserving circle maps stored as identity plus a periodic displacement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, GridMismatchError, PeriodicGrid

# relative to the mean slope, which is 1 for a winding-number-one map
MONO_RTOL = 1e-6


class MonotonicityError(ValueError):
    """A circle map lost (or came too close to losing) its positive slope."""


def mono_threshold(slope: np.ndarray) -> float:
    return MONO_RTOL * float(np.mean(slope))


def check_delta(values) -> None:
    """Pointwise guard on slope samples; the mean slope of a winding-one map is 1."""
    lo = float(np.min(values))
    if not np.isfinite(lo) or lo <= MONO_RTOL:
        raise MonotonicityError(f"slope sample {lo:.3e} is below the monotonicity guard {MONO_RTOL:.0e}")


def check_slope(slope: np.ndarray, what: str = "l_x") -> None:
    slope = np.asarray(slope)
    eps = mono_threshold(slope)
    lo = float(np.min(slope))
    if not np.isfinite(lo) or lo <= eps:
        raise MonotonicityError(f"min {what} = {lo:.3e} is below the monotonicity guard {eps:.3e}")


@dataclass(frozen=True, eq=False)
class CircleDiffeo:
    """psi(x) = x + d(x) with periodic displacement ``d`` sampled on ``grid``."""

    grid: PeriodicGrid
    displacement: np.ndarray

    def __post_init__(self):
        d = np.array(self.displacement, dtype=float)
        if d.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} displacement samples, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("displacement must be finite")
        d.flags.writeable = False
        object.__setattr__(self, "displacement", d)

    @classmethod
    def identity(cls, grid: PeriodicGrid) -> CircleDiffeo:
        return cls(grid, np.zeros(grid.n))

    @classmethod
    def from_map(cls, grid: PeriodicGrid, func) -> CircleDiffeo:
        """Build from a callable returning psi(x) for the lifted map (psi(x + L) = psi(x) + L)."""
        return cls(grid, func(grid.x) - grid.x)

    @classmethod
    def from_displacement(cls, disp: Field) -> CircleDiffeo:
        return cls(disp.grid, disp.values)

    @property
    def values(self) -> np.ndarray:
        return self.grid.x + self.displacement

    def slope(self) -> np.ndarray:
        return 1.0 + self.grid.diff(self.displacement, 1)

    def deriv(self, order: int) -> np.ndarray:
        if order == 1:
            return self.slope()
        return self.grid.diff(self.displacement, order)

    def check(self) -> CircleDiffeo:
        check_slope(self.slope(), "psi_x")
        return self

    def __call__(self, xq) -> np.ndarray:
        xq = np.asarray(xq, dtype=float)
        return xq + self.grid.interp(self.displacement, xq)

    def slope_at(self, xq) -> np.ndarray:
        return 1.0 + self.grid.interp(self.grid.diff(self.displacement, 1), xq)

    def compose(self, inner: CircleDiffeo) -> CircleDiffeo:
        """``self o inner``."""
        if inner.grid != self.grid:
            raise GridMismatchError("cannot compose maps on different grids")
        y = inner.values
        disp = inner.displacement + self.grid.interp(self.displacement, y)
        return CircleDiffeo(self.grid, disp)

    def compose_slope(self, inner: CircleDiffeo) -> np.ndarray:
        """(self o inner)_x by the chain rule, avoiding a second spectral derivative."""
        return self.slope_at(inner.values) * inner.slope()

    def inverse(self, tol: float = 1e-14, max_iter: int = 60) -> CircleDiffeo:
        """Pointwise Newton on psi(y) = x_j, safeguarded by bisection on a bracket."""
        self.check()
        grid = self.grid
        target = grid.x
        d = self.displacement
        span = float(np.max(np.abs(d))) + grid.dx
        lo = target - span
        hi = target + span
        y = target - d
        for _ in range(max_iter):
            f = self(y) - target
            lo = np.where(f < 0, y, lo)
            hi = np.where(f > 0, y, hi)
            step = f / self.slope_at(y)
            y_new = y - step
            outside = (y_new <= lo) | (y_new >= hi)
            y_new = np.where(outside, 0.5 * (lo + hi), y_new)
            if np.max(np.abs(y_new - y)) < tol * max(1.0, grid.length):
                y = y_new
                break
            y = y_new
        return CircleDiffeo(grid, y - target)
