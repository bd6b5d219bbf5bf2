"""Preissman box scheme for the multisymplectic system.

On cell ``[x_j, x_{j+1}] x [t_n, t_{n+1}]`` the scheme imposes::

    M D_t A_x z + K(zbar) D_x A_t z = grad H(zbar),   zbar = A_x A_t z

with ``A`` two-point averages and ``D`` two-point differences. Row 0 of the
state stores the displacement ``d`` of ``l = x + d`` so every row is periodic;
``D_x l = 1 + D_x d``. A periodic box scheme on an even number of nodes is
singular (``A_x`` annihilates the sawtooth mode and ``K`` has odd order), so
the grid must have an odd node count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .algebra import FamilyParams
from .diffeo import MONO_RTOL, MonotonicityError
from .grid import Field, PeriodicGrid
from .msi import (DELTA, L, P, U, THETA, XI, PI2, flux_jacobian, flux_matrix, grad_H, hess_H,
                  mass_matrix, system_dim)

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message}: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class NewtonOpts:
    tol: float = 1e-11
    max_iter: int = 25
    # steps that would push Delta below this fraction of its current value are damped
    delta_floor: float = 0.2


@dataclass
class NewtonStats:
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class ZField:
    """Nodal phase-space state; row 0 is the displacement of ``l``."""

    grid: PeriodicGrid
    z: np.ndarray

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @property
    def l(self) -> np.ndarray:
        return self.grid.x + self.z[L]

    def u_field(self) -> Field:
        return Field(self.grid, self.z[U])

    def lifted(self) -> np.ndarray:
        """State with row 0 holding ``l`` itself (for output)."""
        out = self.z.copy()
        out[L] = self.l
        return out


def _ax(v):
    return 0.5 * (v + np.roll(v, -1, axis=-1))


def _dx(v, h):
    return (np.roll(v, -1, axis=-1) - v) / h


def _check_odd(grid: PeriodicGrid):
    if grid.n % 2 == 0:
        raise ValueError(f"the periodic box scheme needs an odd node count, got n = {grid.n}")


class BoxStepper:
    """Implicit box-scheme stepper with a Newton solver on the periodic block-bidiagonal Jacobian."""

    def __init__(self, grid: PeriodicGrid, p: FamilyParams, newton: NewtonOpts | None = None):
        _check_odd(grid)
        p.require_dynamic()
        self.grid, self.p = grid, p
        self.dim = system_dim(p)
        self.newton = newton or NewtonOpts()
        self.M = mass_matrix(self.dim)
        self.stats = NewtonStats()
        n, d = grid.n, self.dim
        # block sparsity: cell j couples nodes j and j+1
        cells = np.arange(n)
        rows = (cells[:, None] * d + np.arange(d)[None, :])
        self._rows = np.concatenate([np.repeat(rows, d, axis=1).ravel()] * 2)
        cols_j = (cells[:, None] * d + np.arange(d)[None, :])
        cols_j1 = (((cells + 1) % n)[:, None] * d + np.arange(d)[None, :])
        self._cols = np.concatenate([np.tile(cols_j, (1, d)).ravel(), np.tile(cols_j1, (1, d)).ravel()])

    # discrete operators -------------------------------------------------

    def _x_diff(self, v):
        w = _dx(v, self.grid.dx)
        w[L] += 1.0
        return w

    def cell_terms(self, z_old, z_new, dt):
        zm = 0.5 * (z_old + z_new)
        zbar = _ax(zm)
        zt = _ax(z_new - z_old) / dt
        zx = self._x_diff(zm)
        return zbar, zt, zx

    def residual(self, z_old, z_new, dt) -> np.ndarray:
        zbar, zt, zx = self.cell_terms(z_old, z_new, dt)
        K = flux_matrix(zbar, self.p)
        return (np.einsum("ij,jn->in", self.M, zt) + np.einsum("ijn,jn->in", K, zx)
                - grad_H(zbar, self.p))

    def jacobian(self, z_old, z_new, dt) -> sps.csc_matrix:
        zbar, _, zx = self.cell_terms(z_old, z_new, dt)
        K = flux_matrix(zbar, self.p)
        S = 0.25 * (flux_jacobian(zbar, zx, self.p) - hess_H(zbar, self.p))
        Mt = self.M[:, :, None] / (2.0 * dt)
        Kx = K / (2.0 * self.grid.dx)
        left = Mt - Kx + S          # d R_j / d z_j
        right = Mt + Kx + S         # d R_j / d z_{j+1}
        d, n = self.dim, self.grid.n
        vals = np.concatenate([np.moveaxis(left, 2, 0).ravel(), np.moveaxis(right, 2, 0).ravel()])
        return sps.csc_matrix((vals, (self._rows, self._cols)), shape=(d * n, d * n))

    # state preparation ---------------------------------------------------

    def _flat(self, z):
        return z.T.ravel()

    def _unflat(self, v):
        return v.reshape(self.grid.n, self.dim).T

    def _guard(self, z):
        if self.dim == 7 and self.p.a > 0:
            lo = float(np.min(z[DELTA]))
            if not np.isfinite(lo) or lo <= MONO_RTOL:
                raise MonotonicityError(f"Delta guard breached in box scheme (min Delta = {lo:.3e})")

    def _damped(self, z, dz):
        if self.dim != 7 or self.p.a == 0:
            return 1.0
        floor = self.newton.delta_floor * z[DELTA]
        new = z[DELTA] + dz[DELTA]
        bad = new < floor
        if not np.any(bad):
            return 1.0
        ratio = (z[DELTA][bad] - floor[bad]) / (z[DELTA][bad] - new[bad])
        return float(max(min(1.0, ratio.min()), 1e-3))

    def _newton(self, fun, jac, z0, scale):
        opts = self.newton
        z = z0.copy()
        r = fun(z)
        norm = float(np.max(np.abs(r)))
        it = 0
        while norm > opts.tol * scale:
            if it >= opts.max_iter:
                raise NewtonError("box scheme Newton did not converge", norm, it)
            dz = self._unflat(spla.spsolve(jac(z), -self._flat(r)))
            if not np.all(np.isfinite(dz)):
                raise NewtonError("singular box-scheme Jacobian", norm, it)
            z = z + self._damped(z, dz) * dz
            self._guard(z)
            r = fun(z)
            norm = float(np.max(np.abs(r)))
            it += 1
        return z, it, norm

    def step(self, zf: ZField, dt: float) -> ZField:
        if not dt > 0:
            raise ValueError("dt must be positive")
        z_old = zf.z
        scale = max(1.0, float(np.max(np.abs(z_old[1:]))))
        z_new, it, norm = self._newton(lambda z: self.residual(z_old, z, dt),
                                       lambda z: self.jacobian(z_old, z, dt), z_old, scale)
        self.stats.iterations.append(it)
        self.stats.residuals.append(norm)
        return ZField(self.grid, z_new)

    def consistent_state(self, l_disp: np.ndarray, pi: np.ndarray, guess: np.ndarray | None = None) -> ZField:
        """Solve the constraint rows of the scheme at one time level for the non-evolving coordinates.

        ``l`` and ``pi`` are held fixed; the remaining coordinates are chosen so
        that every row without a time derivative holds on every cell.
        """
        grid, d = self.grid, self.dim
        free = [c for c in range(d) if c not in (L, P)]
        z = np.zeros((d, grid.n)) if guess is None else np.array(guess, dtype=float)
        z[L], z[P] = l_disp, pi
        if guess is None and d == 7:
            z[DELTA] = 1.0 + grid.diff(l_disp, 1)
            z[XI] = grid.diff(l_disp, 2)

        def fun(zz):
            zbar = _ax(zz)
            zx = self._x_diff(zz)
            K = flux_matrix(zbar, self.p)
            res = np.einsum("ijn,jn->in", K, zx) - grad_H(zbar, self.p)
            return res[free]

        def jac_full(zz):
            zbar = _ax(zz)
            zx = self._x_diff(zz)
            K = flux_matrix(zbar, self.p)
            S = 0.5 * (flux_jacobian(zbar, zx, self.p) - hess_H(zbar, self.p))
            Kx = K / grid.dx
            return S - Kx, S + Kx

        nf = len(free)
        n = grid.n
        rows = (np.arange(n)[:, None] * nf + np.arange(nf)[None, :])
        cols_j = (np.arange(n)[:, None] * nf + np.arange(nf)[None, :])
        cols_j1 = (((np.arange(n) + 1) % n)[:, None] * nf + np.arange(nf)[None, :])
        r_idx = np.concatenate([np.repeat(rows, nf, axis=1).ravel()] * 2)
        c_idx = np.concatenate([np.tile(cols_j, (1, nf)).ravel(), np.tile(cols_j1, (1, nf)).ravel()])
        sel = np.ix_(free, free)

        scale = max(1.0, float(np.max(np.abs(z[1:]))))
        for it in range(self.newton.max_iter + 1):
            r = fun(z)
            norm = float(np.max(np.abs(r)))
            if norm <= self.newton.tol * scale:
                return ZField(grid, z)
            left, right = jac_full(z)
            vals = np.concatenate([np.moveaxis(left[sel], 2, 0).ravel(), np.moveaxis(right[sel], 2, 0).ravel()])
            Jm = sps.csc_matrix((vals, (r_idx, c_idx)), shape=(nf * n, nf * n))
            dz = spla.spsolve(Jm, -r.T.ravel()).reshape(n, nf).T
            z[free] += dz
            self._guard(z)
        raise NewtonError("constraint projection did not converge", norm, self.newton.max_iter)


def box_scheme_step(zfield: ZField, dt: float, p: FamilyParams, newton: NewtonOpts | None = None) -> ZField:
    return BoxStepper(zfield.grid, p, newton).step(zfield, dt)


def box_initial_state(u0: Field, p: FamilyParams, newton: NewtonOpts | None = None) -> ZField:
    """Discretely consistent box-scheme state with ``l = id`` and ``pi = -(alpha u0 - beta u0_xx)``."""
    grid = u0.grid
    stepper = BoxStepper(grid, p, newton)
    m = p.alpha * u0.values - p.beta * grid.diff(u0.values, 2)
    guess = np.zeros((stepper.dim, grid.n))
    guess[U] = u0.values
    if stepper.dim == 7:
        guess[DELTA] = 1.0
        guess[THETA] = grid.diff(u0.values, 1)
        guess[PI2] = grid.diff(u0.values, 2)
    elif stepper.dim == 4:
        guess[3] = grid.diff(u0.values, 1)
    guess[P] = -m
    return stepper.consistent_state(np.zeros(grid.n), -m, guess)


def box_simulate(u0: Field, p: FamilyParams, dt: float, t_end: float, newton: NewtonOpts | None = None,
                 snapshot_every: int = 1):
    """Run the box scheme from a velocity profile; returns (times, states, stepper)."""
    stepper = BoxStepper(u0.grid, p, newton)
    zf = box_initial_state(u0, p, newton)
    nsteps = int(round(t_end / dt))
    times, states = [0.0], [zf]
    for k in range(1, nsteps + 1):
        zf = stepper.step(zf, dt)
        if k % snapshot_every == 0 or k == nsteps:
            times.append(k * dt)
            states.append(zf)
    return np.array(times), states, stepper
