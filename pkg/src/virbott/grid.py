"""Uniform periodic grids and spectral calculus on the circle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * math.pi


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class PeriodicGrid:
    """``n`` equispaced nodes ``x_j = j*length/n`` on a circle of circumference ``length``."""

    n: int
    length: float = TWO_PI

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs n >= 8 nodes, got {self.n}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"circumference must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers of the ``rfft`` modes."""
        return TWO_PI * np.fft.rfftfreq(self.n, d=self.dx)

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        modes = np.arange(self.k.size)
        return 3 * modes < self.n

    def _symbol(self, order: int) -> np.ndarray:
        sym = (1j * self.k) ** order
        if order % 2 == 1 and self.n % 2 == 0:
            # the unmatched Nyquist mode has no odd derivative
            sym[-1] = 0.0
        return sym

    # array-level kernels; the Field-level API below wraps these

    def diff(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Spectral derivative along the last axis."""
        if order < 1:
            raise ValueError("derivative order must be >= 1")
        return np.fft.irfft(self._symbol(order) * np.fft.rfft(values, axis=-1), n=self.n, axis=-1)

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        """Trapezoid rule, which on periodic data is ``mean * length``."""
        return np.mean(values, axis=-1) * self.length

    def dealias(self, values: np.ndarray) -> np.ndarray:
        """Keep only modes with ``3|k| < n`` (two-thirds rule)."""
        return np.fft.irfft(self._dealias_mask * np.fft.rfft(values, axis=-1), n=self.n, axis=-1)

    def fd_diff(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Centered second-order finite differences (orders 1 and 2 only)."""
        up, down = np.roll(values, -1, axis=-1), np.roll(values, 1, axis=-1)
        if order == 1:
            return (up - down) / (2.0 * self.dx)
        if order == 2:
            return (up - 2.0 * values + down) / self.dx**2
        raise ValueError("finite differences are provided for orders 1 and 2")

    def interp(self, values: np.ndarray, xq) -> np.ndarray:
        """Band-limited trigonometric interpolant of nodal ``values`` evaluated at ``xq``."""
        xq = np.asarray(xq, dtype=float)
        coef = np.fft.rfft(values) / self.n
        weights = np.full(coef.size, 2.0)
        weights[0] = 1.0
        if self.n % 2 == 0:
            weights[-1] = 1.0
        phase = np.exp(1j * np.multiply.outer(np.mod(xq, self.length), self.k))
        return np.real(phase @ (weights * coef))

    def shift(self, values: np.ndarray, s: float) -> np.ndarray:
        """Samples of ``f(x - s)`` for the band-limited interpolant ``f`` (exact translation)."""
        coef = np.fft.rfft(values)
        phase = np.exp(-1j * self.k * s)
        if self.n % 2 == 0:
            # keep the Nyquist mode real, i.e. translate its cosine part only
            phase[-1] = np.cos(self.k[-1] * s)
        return np.fft.irfft(coef * phase, n=self.n)

    def spectral_tail(self, values: np.ndarray) -> float:
        """Fraction of spectral amplitude carried by the top third of modes."""
        amp = np.abs(np.fft.rfft(values))
        total = amp.sum()
        if total == 0.0:
            return 0.0
        return float(amp[~self._dealias_mask].sum() / total)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a periodic function on a :class:`PeriodicGrid`."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> Field:
        return cls(grid, func(grid.x))

    @classmethod
    def constant(cls, grid: PeriodicGrid, c: float) -> Field:
        return cls(grid, np.full(grid.n, float(c)))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> Field:
        return cls(grid, np.zeros(grid.n))

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __pow__(self, p):
        return Field(self.grid, self.values**p)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))


def check_same_grid(*fields: Field) -> PeriodicGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {f.grid} vs {grid}")
    return grid


def spectral_deriv(f: Field, order: int = 1) -> Field:
    """Fourier-diagonal derivative of the given order (>= 1)."""
    if int(order) != order or order < 1:
        raise ValueError(f"derivative order must be a positive integer, got {order}")
    return Field(f.grid, f.grid.diff(f.values, int(order)))


def fd_deriv(f: Field, order: int = 1) -> Field:
    return Field(f.grid, f.grid.fd_diff(f.values, order))


def quadrature(f: Field) -> float:
    return float(f.grid.integrate(f.values))


def helmholtz_symbol(grid: PeriodicGrid, alpha: float, beta: float) -> np.ndarray:
    return alpha + beta * grid.k**2


def helmholtz_solve_values(grid: PeriodicGrid, m: np.ndarray, alpha: float, beta: float,
                           mean_u: float = 0.0, tol: float = 1e-9) -> np.ndarray:
    """Array kernel of :func:`helmholtz_solve`."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    if alpha + beta <= 0:
        raise ValueError("Helmholtz operator is zero for alpha = beta = 0")
    if beta == 0:
        return np.asarray(m, dtype=float) / alpha
    mhat = np.fft.rfft(m)
    sym = helmholtz_symbol(grid, alpha, beta)
    if alpha == 0:
        mean_m = mhat[0].real / grid.n
        if abs(mean_m) > tol * max(1.0, float(np.max(np.abs(m)))):
            raise ValueError(f"alpha = 0 requires zero-mean momentum, got mean {mean_m:.3e}")
        sym = sym.copy()
        sym[0] = 1.0
        mhat = mhat.copy()
        mhat[0] = mean_u * grid.n
    return np.fft.irfft(mhat / sym, n=grid.n)


def helmholtz_solve(m: Field, alpha: float, beta: float, mean_u: float = 0.0) -> Field:
    """Solve ``alpha*u - beta*u_xx = m``; for ``alpha == 0`` the mean of ``u`` is ``mean_u``."""
    return Field(m.grid, helmholtz_solve_values(m.grid, m.values, alpha, beta, mean_u))


def interpolate(f: Field, x):
    """Trigonometric interpolation of ``f`` at ``x`` (reduced modulo the circumference)."""
    out = f.grid.interp(f.values, x)
    return float(out) if np.ndim(out) == 0 else out
