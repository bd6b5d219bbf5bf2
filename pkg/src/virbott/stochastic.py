"""Stratonovich transport noise for the family in momentum form.

``dm = -J(u) dt - J(xi) o dW`` with ``J = d_x m + m d_x + a d_xxx`` and a single
scalar Wiener driver ``W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import newton_krylov

from .algebra import AlgebraElement, DualElement, FamilyParams, coad
from .grid import Field, PeriodicGrid, check_same_grid, helmholtz_solve_values
from .msi import JetSample, VariationJet
from .diffeo import check_delta
from .solver import SimDiagnostics, SimulationAbort, Trajectory, _Rhs, energy, step_count


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Wiener path sampled on ``t_k = k dt``; ``level`` counts bridge refinements of the seed path."""

    seed: int
    dt: float
    W: np.ndarray
    level: int = 0

    @classmethod
    def sample(cls, seed: int, dt: float, t_end: float) -> BrownianPath:
        nsteps = step_count(dt, t_end)
        rng = np.random.default_rng([seed, 0])
        dW = rng.normal(0.0, np.sqrt(dt), nsteps)
        return cls(seed, dt, np.concatenate([[0.0], np.cumsum(dW)]))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.W.size)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.W)

    @property
    def t_end(self) -> float:
        return self.dt * (self.W.size - 1)

    def refine(self) -> BrownianPath:
        """Halve the step with Brownian-bridge midpoints; coarse values are copied exactly."""
        rng = np.random.default_rng([self.seed, self.level + 1])
        h = 0.5 * self.dt
        mid = 0.5 * (self.W[:-1] + self.W[1:]) + rng.normal(0.0, np.sqrt(0.5 * h), self.W.size - 1)
        fine = np.empty(2 * self.W.size - 1)
        fine[::2] = self.W
        fine[1::2] = mid
        return BrownianPath(self.seed, h, fine, self.level + 1)

    def refined(self, times: int) -> BrownianPath:
        path = self
        for _ in range(times):
            path = path.refine()
        return path

    def at_stamps(self, stamps) -> np.ndarray:
        idx = np.rint(np.asarray(stamps) / self.dt).astype(int)
        if np.any(np.abs(idx * self.dt - np.asarray(stamps)) > 1e-9 * max(1.0, self.t_end)):
            raise ValueError("requested stamps are not on the path grid")
        return self.W[idx]


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Spatial profile ``xi`` of the transport noise.

    ``eta`` (noise in the central slot) has no effect on the dynamics and is
    only kept for metadata.
    """

    xi: Field
    gamma: float | None = None
    eta: float | None = None

    @classmethod
    def constant(cls, grid: PeriodicGrid, gamma: float) -> NoiseSpec:
        return cls(Field.constant(grid, gamma), float(gamma))

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> NoiseSpec:
        return cls.constant(grid, 0.0)


def _padded_product(grid: PeriodicGrid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Product projected on the resolved modes via 3/2-rule zero padding."""
    n = grid.n
    npad = 3 * n // 2 + (3 * n // 2) % 2
    fh, gh = np.fft.rfft(f), np.fft.rfft(g)
    if n % 2 == 0:
        fh, gh = fh.copy(), gh.copy()
        fh[-1] *= 0.5
        gh[-1] *= 0.5
    fp = np.fft.irfft(fh, n=npad) * (npad / n)
    gp = np.fft.irfft(gh, n=npad) * (npad / n)
    ph = np.fft.rfft(fp * gp)[: n // 2 + 1] * (n / npad)
    if n % 2 == 0:
        ph[-1] = ph[-1].real * 2.0
    return np.fft.irfft(ph, n=n)


def j_values(grid: PeriodicGrid, m: np.ndarray, g: np.ndarray, a: float) -> np.ndarray:
    D = grid.diff
    out = _padded_product(grid, D(m, 1), g) + 2.0 * _padded_product(grid, m, D(g, 1))
    if a:
        out = out + a * D(g, 3)
    return out


def j_operator(m: Field, g: Field, a: float) -> Field:
    """``J(g) = (m g)_x + m g_x + a g_xxx`` with dealiased products."""
    grid = check_same_grid(m, g)
    return Field(grid, j_values(grid, m.values, g.values, a))


def expanded_noise_term(u: Field, xi: Field, p: FamilyParams) -> Field:
    """Noise bracket written in terms of ``u`` as in the expanded deformed equation (no dealiasing)."""
    grid = check_same_grid(u, xi)
    D = grid.diff
    uv, xv = u.values, xi.values
    xx = D(xv, 1)
    val = p.alpha * (2 * xx * uv + xv * D(uv, 1))
    if p.beta:
        val = val - p.beta * (2 * xx * D(uv, 2) + xv * D(uv, 3))
    return Field(grid, val + p.a * D(xv, 3))


def coad_noise_term(m: Field, xi: Field, a: float) -> Field:
    return coad(AlgebraElement(xi, 0.0), DualElement(m, a)).m


class _SdeRhs:
    def __init__(self, grid: PeriodicGrid, p: FamilyParams, noise: NoiseSpec, mean_u: float):
        self.det = _Rhs(grid, p, mean_u)
        self.grid, self.p = grid, p
        self.xi = noise.xi.values
        self.const = noise.gamma is not None or np.ptp(self.xi) == 0.0
        self.gamma = float(self.xi[0])

    def drift(self, m):
        return self.det(m)

    def diffusion(self, m):
        if self.const:
            return -self.gamma * self.grid.diff(m, 1)
        return -j_values(self.grid, m, self.xi, self.p.a)


def stochastic_rhs(m: Field, p: FamilyParams, noise: NoiseSpec, mean_u: float = 0.0) -> tuple[Field, Field]:
    """(drift, diffusion) with drift ``-J(u)`` (the deterministic flow) and diffusion ``-J(xi)``."""
    grid = check_same_grid(m, noise.xi)
    if p.alpha == 0:
        helmholtz_solve_values(grid, m.values, p.alpha, p.beta, mean_u)
    rhs = _SdeRhs(grid, p, noise, mean_u)
    return Field(grid, rhs.drift(m.values)), Field(grid, rhs.diffusion(m.values))


def _heun(rhs: _SdeRhs, m, dt, dW):
    f0, g0 = rhs.drift(m), rhs.diffusion(m)
    pred = m + f0 * dt + g0 * dW
    return m + 0.5 * dt * (f0 + rhs.drift(pred)) + 0.5 * dW * (g0 + rhs.diffusion(pred))


def _midpoint(rhs: _SdeRhs, m, dt, dW, tol=1e-12):
    guess = _heun(rhs, m, dt, dW)
    scale = max(1.0, float(np.max(np.abs(m))))

    def F(m1):
        mid = 0.5 * (m + m1)
        return m1 - m - dt * rhs.drift(mid) - dW * rhs.diffusion(mid)

    return newton_krylov(F, guess, f_tol=tol * scale, method="lgmres")


def heun_stratonovich_step(m: Field, dt: float, dW: float, p: FamilyParams, noise: NoiseSpec,
                           mean_u: float = 0.0) -> Field:
    """Stochastic Heun: Euler predictor, trapezoidal corrector in both drift and noise."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = check_same_grid(m, noise.xi)
    out = _heun(_SdeRhs(grid, p, noise, mean_u), m.values, dt, float(dW))
    if not np.all(np.isfinite(out)):
        raise SimulationAbort("non-finite momentum in Heun step", 1)
    return Field(grid, out)


SCHEMES = {"heun": _heun, "midpoint": _midpoint}


@dataclass
class SdeRun:
    trajectory: Trajectory
    path: BrownianPath
    noise: NoiseSpec
    W: np.ndarray = field(default_factory=lambda: np.zeros(0))


def simulate_sde(m0: Field, p: FamilyParams, noise: NoiseSpec, dt: float, t_end: float,
                 seed: int | None = None, path: BrownianPath | None = None, mean_u: float = 0.0,
                 snapshot_every: int = 1, scheme: str = "heun", tail_limit: float | None = None) -> SdeRun:
    """Integrate the Stratonovich system on one Brownian path.

    Either ``seed`` or a prebuilt ``path`` (with matching ``dt``) must be given.
    ``tail_limit`` aborts the run once the energy fraction in the top third of
    the spectrum exceeds it.
    """
    grid = check_same_grid(m0, noise.xi)
    if path is None:
        if seed is None:
            raise ValueError("simulate_sde needs a seed or a path")
        path = BrownianPath.sample(seed, dt, t_end)
    if abs(path.dt - dt) > 1e-12 * dt:
        raise ValueError(f"path step {path.dt} does not match dt = {dt}")
    nsteps = step_count(dt, t_end)
    if nsteps > path.W.size - 1:
        raise ValueError("Brownian path is shorter than the run")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    stepper = SCHEMES[scheme]
    rhs = _SdeRhs(grid, p, noise, mean_u)
    xi = noise.xi.values
    diag = SimDiagnostics()
    diag.extra["W"] = []

    def record(t, m, k):
        u = rhs.det.velocity(m)
        diag.record(t, energy(grid, u, p), grid.integrate(m), grid.integrate(xi * m))
        diag.extra["W"].append(float(path.W[k]))
        return u

    m = np.array(m0.values, dtype=float)
    u = record(0.0, m, 0)
    times, ms, us = [0.0], [m.copy()], [u]
    dW = path.increments
    for step in range(1, nsteps + 1):
        m = stepper(rhs, m, dt, dW[step - 1])
        if not np.all(np.isfinite(m)):
            raise SimulationAbort("non-finite momentum", step)
        if tail_limit is not None and grid.spectral_tail(m) > tail_limit:
            raise SimulationAbort("spectral tail exceeded the resolution limit", step)
        t = step * dt
        u = record(t, m, step)
        if step % snapshot_every == 0 or step == nsteps:
            times.append(t)
            ms.append(m.copy())
            us.append(u)
    traj = Trajectory(grid, p, np.array(times), np.array(ms), np.array(us), mean_u, dt, diag)
    return SdeRun(traj, path, noise, path.at_stamps(traj.times))


def shifted_reference(det_traj: Trajectory, gamma: float, path: BrownianPath) -> Trajectory:
    """``u(x - gamma W(t), t)`` applied snapshot by snapshot with an exact trigonometric shift."""
    grid = det_traj.grid
    W = path.at_stamps(det_traj.times)
    m = np.array([grid.shift(mk, gamma * w) for mk, w in zip(det_traj.m, W)])
    u = np.array([grid.shift(uk, gamma * w) for uk, w in zip(det_traj.u, W)])
    return Trajectory(grid, det_traj.params, det_traj.times.copy(), m, u, det_traj.mean_u, det_traj.dt)


def stochastic_symplectic_density(V: VariationJet, W: VariationJet, j: JetSample, noise: NoiseSpec,
                                  a: float) -> np.ndarray:
    """``Gbar = -xi (W^1 V^3 - W^3 V^1) - (a/2)(xi_xx / l_x^2)(W^1 V^1_1 - W^1_1 V^1)``."""
    grid = noise.xi.grid
    xi = noise.xi.values
    out = -xi * (W.l * V.pi - W.pi * V.l)
    if a:
        lx = np.asarray(j.l_x)
        check_delta(lx)
        out = out - 0.5 * a * grid.diff(xi, 2) / lx**2 * (W.l * V.l_x - W.l_x * V.l)
    return out
