"""Clebsch trajectories with first variations, and the discrete symplecticity residual.

The base solution evolves ``(m, l)``: ``m`` by the family flow and ``l`` by
``l_t + u l_x = 0``. The multiplier ``pi`` is recovered pointwise from the
Clebsch momentum map ``m = -pi l_x + (a/2)(l_xx/l_x)_x``. Tangent vectors are
integrated with the linearised right-hand side inside the same RK4 stages, so
they are exact first variations of the discrete flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import FamilyParams
from .diffeo import check_slope
from .grid import Field, PeriodicGrid
from .msi import JetSample, VariationJet, symplectic_density
from .solver import SimulationAbort, _Rhs, step_count


class _TangentRhs:
    def __init__(self, grid: PeriodicGrid, p: FamilyParams, mean_u: float):
        self.base = _Rhs(grid, p, mean_u)
        self.grid, self.p = grid, p

    def _fields(self, m, uhat_fn):
        b = self.base
        n = self.grid.n
        mhat = np.fft.rfft(m)
        uhat = uhat_fn(mhat)
        mh, uh = mhat * b.mask, uhat * b.mask
        return (uhat, np.fft.irfft(mh, n=n), np.fft.irfft(uh, n=n),
                np.fft.irfft(b.ik * mh, n=n), np.fft.irfft(b.ik * uh, n=n))

    def _lin_uhat(self, mhat):
        return mhat * self.base.inv_sym * (np.arange(mhat.size) > 0 if self.base.gauge else 1.0)

    def __call__(self, state):
        b, n, grid = self.base, self.grid.n, self.grid
        m, d = state[0], state[1]
        uhat, mm, u, mx, ux = self._fields(m, b.u_hat)
        lx = 1.0 + grid.diff(d, 1)
        mask = b.mask
        dealias = lambda v: np.fft.irfft(np.fft.rfft(v) * mask, n=n)
        out = np.empty_like(state)
        out[0] = np.fft.irfft(-np.fft.rfft(mx * u + 2.0 * mm * ux) * mask - self.p.a * b.ik3 * uhat, n=n)
        out[1] = -dealias(u * lx)
        for k in range(2, state.shape[0], 2):
            dm, dd = state[k], state[k + 1]
            duhat, dmm, du, dmx, dux = self._fields(dm, self._lin_uhat)
            prod = dmx * u + mx * du + 2.0 * (dmm * ux + mm * dux)
            out[k] = np.fft.irfft(-np.fft.rfft(prod) * mask - self.p.a * b.ik3 * duhat, n=n)
            out[k + 1] = -dealias(du * lx + u * grid.diff(dd, 1))
        return out

    def velocity(self, m):
        return self.base.velocity(m)

    def lin_velocity(self, dm):
        return np.fft.irfft(self._lin_uhat(np.fft.rfft(dm)), n=self.grid.n)


def pi_from_momentum(grid: PeriodicGrid, m: np.ndarray, d: np.ndarray, a: float) -> np.ndarray:
    """Invert the momentum map for ``pi`` given ``m`` and the displacement of ``l``."""
    lx = 1.0 + grid.diff(d, 1)
    check_slope(lx)
    lxx = grid.diff(d, 2)
    return (-m + 0.5 * a * grid.diff(lxx / lx, 1)) / lx


def lin_pi(grid: PeriodicGrid, m, d, dm, dd, a: float) -> np.ndarray:
    D = grid.diff
    lx = 1.0 + D(d, 1)
    lxx = D(d, 2)
    dlx, dlxx = D(dd, 1), D(dd, 2)
    pi = pi_from_momentum(grid, m, d, a)
    return (-dm + 0.5 * a * D(dlxx / lx - lxx * dlx / lx**2, 1)) / lx - pi * dlx / lx


@dataclass
class ClebschTrajectory:
    grid: PeriodicGrid
    params: FamilyParams
    times: np.ndarray
    m: np.ndarray
    u: np.ndarray
    d: np.ndarray
    pi: np.ndarray
    variations: list  # one dict per tangent: keys "l", "u", "pi" -> (n_t, n) arrays

    def jet(self, k: int) -> JetSample:
        grid = self.grid
        D = grid.diff
        d, u, pi = self.d[k], self.u[k], self.pi[k]
        return JetSample(grid.x + d, 1.0 + D(d, 1), D(d, 2), D(d, 3),
                         u, D(u, 1), D(u, 2), D(u, 3),
                         pi, D(pi, 1), D(pi, 2), D(pi, 3))

    def variation_jet(self, idx: int, k: int) -> VariationJet:
        v = self.variations[idx]
        return VariationJet.from_fields(self.grid, v["l"][k], v["u"][k], v["pi"][k])


def clebsch_tangent_simulate(m0: Field, p: FamilyParams, dt: float, t_end: float,
                             tangents=(), l0_disp: np.ndarray | None = None,
                             mean_u: float = 0.0, snapshot_every: int = 1) -> ClebschTrajectory:
    """RK4 for ``(m, l)`` plus tangent vectors given as ``(dm0, dl0)`` array pairs."""
    grid = m0.grid
    rhs = _TangentRhs(grid, p, mean_u)
    d0 = np.zeros(grid.n) if l0_disp is None else np.asarray(l0_disp, dtype=float)
    rows = [m0.values, d0]
    for dm0, dl0 in tangents:
        rows += [np.asarray(dm0, dtype=float), np.asarray(dl0, dtype=float)]
    y = np.array(rows)
    nsteps = step_count(dt, t_end)
    snaps, times = [y.copy()], [0.0]
    for step in range(1, nsteps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise SimulationAbort("non-finite Clebsch state", step)
        if step % snapshot_every == 0 or step == nsteps:
            snaps.append(y.copy())
            times.append(step * dt)
    snaps = np.array(snaps)
    m, d = snaps[:, 0], snaps[:, 1]
    u = np.array([rhs.velocity(mk) for mk in m])
    pi = np.array([pi_from_momentum(grid, mk, dk, p.a) for mk, dk in zip(m, d)])
    variations = []
    for k in range(2, snaps.shape[1], 2):
        dm, dd = snaps[:, k], snaps[:, k + 1]
        variations.append({
            "l": dd,
            "u": np.array([rhs.lin_velocity(v) for v in dm]),
            "pi": np.array([lin_pi(grid, mk, dk, dmk, ddk, p.a) for mk, dk, dmk, ddk in zip(m, d, dm, dd)]),
        })
    return ClebschTrajectory(grid, p, np.array(times), m, u, d, pi, variations)


@dataclass(frozen=True)
class VariationPair:
    """Indices of two tangents stored on a :class:`ClebschTrajectory`."""

    v: int = 0
    w: int = 1


def density_series(traj: ClebschTrajectory, pair: VariationPair = VariationPair()):
    """``F`` and ``G`` at every snapshot, shape ``(n_t, n)`` each."""
    F, G = [], []
    for k in range(len(traj.times)):
        f, g = symplectic_density(traj.variation_jet(pair.v, k), traj.variation_jet(pair.w, k),
                                  traj.jet(k), traj.params.beta, traj.params.a)
        F.append(f)
        G.append(g)
    return np.array(F), np.array(G)


def symplecticity_residual(traj: ClebschTrajectory, pair: VariationPair = VariationPair()) -> np.ndarray:
    """``d_t F + d_x G`` on interior snapshots: centered differences in t, spectral in x."""
    if len(traj.times) < 3:
        raise ValueError("need at least 3 snapshots")
    steps = np.diff(traj.times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("snapshot stamps must be uniformly spaced")
    F, G = density_series(traj, pair)
    Ft = (F[2:] - F[:-2]) / (2.0 * steps[0])
    Gx = traj.grid.diff(G[1:-1], 1)
    return Ft + Gx


def perturb_variation(traj: ClebschTrajectory, idx: int, rng: np.random.Generator,
                      amplitude: float = 0.1, modes: int = 3) -> ClebschTrajectory:
    """Copy of ``traj`` whose tangent ``idx`` is shifted by a fixed random smooth field.

    The result no longer solves the linearised equations, so it serves as a
    negative control for :func:`symplecticity_residual`.
    """
    x = traj.grid.x * (2.0 * np.pi / traj.grid.length)

    def smooth():
        return sum(rng.normal() * np.cos(k * x) + rng.normal() * np.sin(k * x) for k in range(1, modes + 1))

    variations = [dict(v) for v in traj.variations]
    variations[idx] = {key: val + amplitude * smooth()[None, :] for key, val in traj.variations[idx].items()}
    return ClebschTrajectory(traj.grid, traj.params, traj.times, traj.m, traj.u, traj.d, traj.pi, variations)
