"""Group-level reconstruction on the Virasoro-Bott group.

Group elements are pairs ``(psi, theta)`` with ``psi`` a circle diffeomorphism
stored as a displacement. The forward map solves ``psi_t = u(psi, t)`` along
characteristics, the inverse map ``l = psi^{-1}`` solves ``l_t + u l_x = 0``,
and ``theta`` follows from the cocycle rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .diffeo import CircleDiffeo, check_slope
from .grid import GridMismatchError, PeriodicGrid


def bott_cocycle(psi1: CircleDiffeo, psi2: CircleDiffeo) -> float:
    """``B(psi1, psi2) = 1/2 int log (psi1 o psi2)_x  d log psi2_x``."""
    if psi1.grid != psi2.grid:
        raise GridMismatchError("cocycle arguments live on different grids")
    grid = psi1.grid
    s2 = psi2.slope()
    check_slope(s2, "psi2_x")
    psi1.check()
    comp = psi1.compose_slope(psi2)
    check_slope(comp, "(psi1 o psi2)_x")
    return 0.5 * float(grid.integrate(np.log(comp) * grid.diff(np.log(s2), 1)))


@dataclass(frozen=True, eq=False)
class GroupElement:
    psi: CircleDiffeo
    theta: float = 0.0

    @classmethod
    def identity(cls, grid: PeriodicGrid) -> GroupElement:
        return cls(CircleDiffeo.identity(grid), 0.0)


def group_compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """``(psi1 o psi2, B(psi1, psi2) + theta1 + theta2)``."""
    b = bott_cocycle(g1.psi, g2.psi)
    psi = g1.psi.compose(g2.psi).check()
    return GroupElement(psi, b + g1.theta + g2.theta)


def group_inverse(g: GroupElement) -> GroupElement:
    inv = g.psi.inverse()
    return GroupElement(inv, -g.theta - bott_cocycle(g.psi, inv))


class VelocityHistory:
    """Velocity snapshots with interpolation in time.

    Linear interpolation by default; cubic Hermite when snapshot time
    derivatives ``u_t`` are supplied.
    """

    def __init__(self, grid: PeriodicGrid, times, u, u_t=None):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.u_t = None if u_t is None else np.asarray(u_t, dtype=float)
        if self.u.shape != (self.times.size, grid.n):
            raise ValueError("velocity snapshots do not match times/grid")
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("need at least two strictly increasing stamps")

    @classmethod
    def from_trajectory(cls, traj, hermite: bool = False) -> VelocityHistory:
        return cls(traj.grid, traj.times, traj.u, traj.u_t() if hermite else None)

    def at(self, t: float) -> np.ndarray:
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"t = {t} outside the sampled window [{ts[0]}, {ts[-1]}]")
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        if self.u_t is None:
            return (1.0 - s) * self.u[k] + s * self.u[k + 1]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * self.u[k] + h * h10 * self.u_t[k] + h01 * self.u[k + 1] + h * h11 * self.u_t[k + 1]


def _as_history(u_traj, hermite=False) -> VelocityHistory:
    if isinstance(u_traj, VelocityHistory):
        return u_traj
    return VelocityHistory.from_trajectory(u_traj, hermite)


def _stamps(hist: VelocityHistory, dt: float | None):
    t0, t1 = hist.times[0], hist.times[-1]
    if dt is None:
        return hist.times
    nsteps = max(1, int(round((t1 - t0) / dt)))
    return np.linspace(t0, t1, nsteps + 1)


def forward_map_from_velocity(u_traj, dt: float | None = None, hermite: bool = False) -> tuple[np.ndarray, list]:
    """RK4 on ``psi_t = u(psi, t)`` from ``psi = id``; returns (times, diffeos).

    The velocity is interpolated trigonometrically in x and in time by
    :class:`VelocityHistory`. ``dt`` defaults to the snapshot spacing.
    """
    hist = _as_history(u_traj, hermite)
    grid = hist.grid
    times = _stamps(hist, dt)

    def vel(t, y):
        return grid.interp(hist.at(t), y)

    y = grid.x.copy()
    out = [CircleDiffeo.identity(grid)]
    for t, tn in zip(times[:-1], times[1:]):
        h = tn - t
        k1 = vel(t, y)
        k2 = vel(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = vel(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = vel(tn, y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(CircleDiffeo(grid, y - grid.x).check())
    return times, out


def advect_inverse_map(l0: CircleDiffeo, u_traj, dt: float | None = None, hermite: bool = False) -> tuple[np.ndarray, list]:
    """Method-of-lines RK4 for ``l_t + u l_x = 0`` on the displacement of ``l``."""
    hist = _as_history(u_traj, hermite)
    grid = hist.grid
    if l0.grid != grid:
        raise GridMismatchError("initial map and velocity live on different grids")
    times = _stamps(hist, dt)

    def rhs(t, d):
        lx = 1.0 + grid.diff(d, 1)
        return -hist.at(t) * lx

    d = np.array(l0.displacement, dtype=float)
    out = [l0.check()]
    for t, tn in zip(times[:-1], times[1:]):
        h = tn - t
        k1 = rhs(t, d)
        k2 = rhs(t + 0.5 * h, d + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, d + 0.5 * h * k2)
        k4 = rhs(tn, d + h * k3)
        d = d + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(CircleDiffeo(grid, d).check())
    return times, out


def cocycle_rate(grid: PeriodicGrid, u: np.ndarray, l: CircleDiffeo) -> float:
    """``r = 1/2 int u_x l_xx / l_x dx``."""
    lx = l.slope()
    check_slope(lx)
    return 0.5 * float(grid.integrate(grid.diff(u, 1) * l.deriv(2) / lx))


def theta_reconstruct(u_traj, l_traj, a: float, theta0: float = 0.0):
    """``theta(t)`` from ``theta_t = a - r(t)``; returns ``(times, theta, r)``.

    ``l_traj`` is a ``(times, diffeos)`` pair aligned with the velocity
    snapshots. The rate is a function of time only, so the RK4 quadrature
    reduces to Simpson's rule on the stamps.
    """
    hist = _as_history(u_traj)
    times, maps = l_traj
    times = np.asarray(times, dtype=float)
    if times.shape != hist.times.shape or not np.allclose(times, hist.times, rtol=0, atol=1e-12):
        raise ValueError("velocity and inverse-map stamps are not aligned")
    r = np.array([cocycle_rate(hist.grid, uk, lk) for uk, lk in zip(hist.u, maps)])
    integrand = a - r
    if times.size < 3:
        theta = theta0 + np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (integrand[1:] + integrand[:-1]))])
    else:
        theta = theta0 + cumulative_simpson(integrand, x=times, initial=0.0)
    return times, theta, r


def cocycle_rate_fd(psi_prev: CircleDiffeo, psi_next: CircleDiffeo, l_now: CircleDiffeo, h: float) -> float:
    """Centered difference ``[B(psi(t+h), l(t)) - B(psi(t-h), l(t))] / 2h``."""
    return (bott_cocycle(psi_next, l_now) - bott_cocycle(psi_prev, l_now)) / (2.0 * h)


def mutual_inverse_error(psi: CircleDiffeo, l: CircleDiffeo) -> float:
    """``max_X |l(psi(X)) - X|``."""
    return float(np.max(np.abs(l(psi.values) - psi.grid.x)))
