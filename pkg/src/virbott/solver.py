"""Pseudospectral method-of-lines solver for the family in momentum form.

The prognostic variable is ``m = alpha*u - beta*u_xx`` for every parameter
choice, and the flow is ``m_t = -(m_x u + 2 m u_x + a u_xxx)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import FamilyParams, ep_residual
from .grid import Field, PeriodicGrid, helmholtz_solve_values, helmholtz_symbol

log = logging.getLogger(__name__)


class SimulationAbort(RuntimeError):
    """A run produced non-finite values or lost resolution."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass
class SimDiagnostics:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    hbar: list | None = None
    extra: dict = field(default_factory=dict)

    def record(self, t, energy, mass, hbar=None):
        self.times.append(float(t))
        self.energy.append(float(energy))
        self.mass.append(float(mass))
        if hbar is not None:
            if self.hbar is None:
                self.hbar = []
            self.hbar.append(float(hbar))

    def columns(self) -> dict:
        cols = {"t": self.times, "energy": self.energy, "mass": self.mass}
        if self.hbar is not None:
            cols["hbar"] = self.hbar
        cols.update(self.extra)
        return cols

    def relative_drift(self, name: str) -> float:
        series = np.asarray(getattr(self, name))
        scale = max(abs(series[0]), 1e-300)
        return float(np.max(np.abs(series - series[0])) / scale)

    def absolute_drift(self, name: str) -> float:
        series = np.asarray(getattr(self, name))
        return float(np.max(np.abs(series - series[0])))


@dataclass
class Trajectory:
    """Snapshots of ``m`` (and the matching ``u``) at uniformly spaced times."""

    grid: PeriodicGrid
    params: FamilyParams
    times: np.ndarray
    m: np.ndarray
    u: np.ndarray
    mean_u: float = 0.0
    dt: float = 0.0
    diagnostics: SimDiagnostics | None = None

    def __len__(self):
        return len(self.times)

    def u_field(self, k: int) -> Field:
        return Field(self.grid, self.u[k])

    def m_field(self, k: int) -> Field:
        return Field(self.grid, self.m[k])

    @property
    def spacing(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def u_t(self) -> np.ndarray:
        """Exact time derivative of ``u`` at each snapshot from the flow's right-hand side."""
        out = np.empty_like(self.u)
        for k in range(len(self.times)):
            mt = family_rhs_values(self.grid, self.m[k], self.params, self.mean_u)
            out[k] = helmholtz_solve_values(self.grid, mt, self.params.alpha, self.params.beta, 0.0)
        return out


class _Rhs:
    """Precomputed spectral symbols for one (grid, params) pair."""

    def __init__(self, grid: PeriodicGrid, p: FamilyParams, mean_u: float):
        p.require_dynamic()
        self.grid, self.p, self.mean_u = grid, p, mean_u
        sym = helmholtz_symbol(grid, p.alpha, p.beta).astype(complex)
        self.gauge = p.alpha == 0
        if self.gauge:
            sym[0] = 1.0
        self.inv_sym = 1.0 / sym
        ik = 1j * grid.k
        if grid.n % 2 == 0:
            ik = ik.copy()
            ik[-1] = 0.0
        self.ik = ik
        self.ik3 = (1j * grid.k) ** 3
        if grid.n % 2 == 0:
            self.ik3[-1] = 0.0
        self.mask = grid._dealias_mask

    def u_hat(self, mhat):
        uhat = mhat * self.inv_sym
        if self.gauge:
            uhat[0] = self.mean_u * self.grid.n
        return uhat

    def __call__(self, m: np.ndarray) -> np.ndarray:
        n = self.grid.n
        mhat = np.fft.rfft(m)
        uhat = self.u_hat(mhat)
        mh = mhat * self.mask
        uh = uhat * self.mask
        u = np.fft.irfft(uh, n=n)
        mm = np.fft.irfft(mh, n=n)
        ux = np.fft.irfft(self.ik * uh, n=n)
        mx = np.fft.irfft(self.ik * mh, n=n)
        prod_hat = np.fft.rfft(mx * u + 2.0 * mm * ux) * self.mask
        rhs_hat = -prod_hat - self.p.a * self.ik3 * uhat
        return np.fft.irfft(rhs_hat, n=n)

    def velocity(self, m: np.ndarray) -> np.ndarray:
        return np.fft.irfft(self.u_hat(np.fft.rfft(m)), n=self.grid.n)


def family_rhs_values(grid: PeriodicGrid, m: np.ndarray, p: FamilyParams, mean_u: float = 0.0) -> np.ndarray:
    return _Rhs(grid, p, mean_u)(m)


def family_rhs(m: Field, p: FamilyParams, mean_u: float = 0.0) -> Field:
    """Dealiased ``-(m_x u + 2 m u_x + a u_xxx)`` with ``u`` from the Helmholtz inversion."""
    if p.alpha == 0:
        # surfaces the gauge error of helmholtz_solve for non-zero-mean momentum
        helmholtz_solve_values(m.grid, m.values, p.alpha, p.beta, mean_u)
    return Field(m.grid, family_rhs_values(m.grid, m.values, p, mean_u))


def energy(grid: PeriodicGrid, u: np.ndarray, p: FamilyParams) -> float:
    """``h = 1/2 int(alpha u^2 + beta u_x^2) dx``."""
    dens = p.alpha * u**2
    if p.beta:
        dens = dens + p.beta * grid.diff(u, 1) ** 2
    return 0.5 * float(grid.integrate(dens))


def rk4_step(rhs, m: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(m)
    k2 = rhs(m + 0.5 * dt * k1)
    k3 = rhs(m + 0.5 * dt * k2)
    k4 = rhs(m + dt * k3)
    return m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(dt: float, t_end: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"t_end must be non-negative, got {t_end}")
    return int(round(t_end / dt))


def rk4_simulate(m0: Field, p: FamilyParams, dt: float, t_end: float, mean_u: float = 0.0,
                 snapshot_every: int = 1, xi: Field | None = None) -> Trajectory:
    """Classical RK4 in time.

    The number of steps is ``round(t_end/dt)``. Dispersive stiffness requires
    roughly ``dt < 2.8 / (a * k_max^3)`` for KdV-like runs (``beta = 0``).
    """
    grid = m0.grid
    rhs = _Rhs(grid, p, mean_u)
    nsteps = step_count(dt, t_end)
    diag = SimDiagnostics()
    xi_vals = None if xi is None else xi.values

    def record(t, m):
        u = rhs.velocity(m)
        hbar = None if xi_vals is None else grid.integrate(xi_vals * m)
        diag.record(t, energy(grid, u, p), grid.integrate(m), hbar)
        return u

    m = np.array(m0.values, dtype=float)
    u = record(0.0, m)
    times, ms, us = [0.0], [m.copy()], [u]
    for step in range(1, nsteps + 1):
        m = rk4_step(rhs, m, dt)
        if not np.all(np.isfinite(m)):
            raise SimulationAbort("non-finite momentum", step)
        t = step * dt
        u = record(t, m)
        if step % snapshot_every == 0 or step == nsteps:
            times.append(t)
            ms.append(m.copy())
            us.append(u)
    return Trajectory(grid, p, np.array(times), np.array(ms), np.array(us), mean_u, dt, diag)


def momentum_from_velocity(u: Field, p: FamilyParams) -> Field:
    m = p.alpha * u.values
    if p.beta:
        m = m - p.beta * u.grid.diff(u.values, 2)
    return Field(u.grid, m)


def soliton_speed(k: float, a: float) -> float:
    return 4.0 * a * k * k


def _soliton_phase(k, a, x, t, length, x0):
    xi = np.asarray(x, dtype=float) - x0 - soliton_speed(k, a) * t
    if length is not None:
        xi = np.mod(xi + 0.5 * length, length) - 0.5 * length
    return k * xi


def kdv_soliton(k: float, a: float, x, t: float = 0.0, length: float | None = None, x0: float = 0.0):
    """``4 a k^2 sech^2(k (x - x0 - 4 a k^2 t))``, wrapped to ``[-L/2, L/2)`` around the crest if ``length`` is given."""
    if k <= 0:
        raise ValueError("soliton wavenumber must be positive")
    z = _soliton_phase(k, a, x, t, length, x0)
    return 4.0 * a * k * k / np.cosh(z) ** 2


def kdv_soliton_dt(k: float, a: float, x, t: float = 0.0, length: float | None = None, x0: float = 0.0):
    """Analytic time derivative of :func:`kdv_soliton`."""
    z = _soliton_phase(k, a, x, t, length, x0)
    amp = 4.0 * a * k * k
    return soliton_speed(k, a) * 2.0 * amp * k * np.tanh(z) / np.cosh(z) ** 2


def soliton_field(grid: PeriodicGrid, k: float, a: float, t: float = 0.0, x0: float | None = None) -> Field:
    x0 = 0.5 * grid.length if x0 is None else x0
    return Field(grid, kdv_soliton(k, a, grid.x, t, grid.length, x0))


def peak_location(f: Field, tol: float = 1e-13) -> float:
    """Location of the global maximum of the trigonometric interpolant."""
    grid = f.grid
    j = int(np.argmax(f.values))
    fx = grid.diff(f.values, 1)
    fxx = grid.diff(f.values, 2)
    x = grid.x[j]
    for _ in range(50):
        g = float(grid.interp(fx, x))
        h = float(grid.interp(fxx, x))
        if h >= 0:
            break
        step = g / h
        step = max(-grid.dx, min(grid.dx, step))
        x -= step
        if abs(step) < tol:
            break
    return float(np.mod(x, grid.length))


def pde_residual(traj: Trajectory, p: FamilyParams | None = None) -> np.ndarray:
    """Residual of the family equation at interior snapshots (centered in time, spectral in space)."""
    p = traj.params if p is None else p
    if len(traj.times) < 3:
        raise ValueError("pde_residual needs at least 3 snapshots")
    steps = np.diff(traj.times)
    h = steps[0]
    if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("snapshots must be uniformly spaced")
    out = np.empty((len(traj.times) - 2, traj.grid.n))
    for k in range(1, len(traj.times) - 1):
        ut = (traj.u[k + 1] - traj.u[k - 1]) / (2.0 * h)
        out[k - 1] = ep_residual(traj.u_field(k), Field(traj.grid, ut), p).values
    return out


def observed_orders(errors) -> list:
    """log2 ratios of consecutive errors under halving."""
    errors = list(errors)
    return [math.log2(errors[i - 1] / errors[i]) if errors[i] > 0 and errors[i - 1] > 0 else float("nan")
            for i in range(1, len(errors))]
