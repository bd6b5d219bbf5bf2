"""Refinement studies producing order tables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import FamilyParams
from .box import NewtonOpts, box_simulate
from .grid import Field, PeriodicGrid
from .msi import U
from .solver import kdv_soliton, momentum_from_velocity, rk4_simulate

MIN_LEVELS = 3


@dataclass
class OrderRow:
    level: int
    n: int
    dx: float
    dt: float
    error: float
    order: float = float("nan")


def _fill_orders(rows: list[OrderRow], by: str) -> list[OrderRow]:
    for prev, row in zip(rows[:-1], rows[1:]):
        ratio = getattr(prev, by) / getattr(row, by)
        if row.error > 0 and prev.error > 0:
            row.order = math.log(prev.error / row.error) / math.log(ratio)
    return rows


def _check_levels(levels: int):
    if levels < MIN_LEVELS:
        raise ValueError(f"a convergence study needs at least {MIN_LEVELS} levels, got {levels}")


def box_soliton_study(levels: int = 4, n0: int = 129, length: float = 80.0, k: float = 0.5, a: float = 1.0,
                      t_end: float = 0.5, steps0: int = 4, x0: float = 30.0,
                      newton: NewtonOpts | None = None) -> list[OrderRow]:
    """Box scheme on the KdV soliton under simultaneous halving of dx and dt.

    Levels use ``n = (n0 - 1) 2^l + 1`` nodes (odd, as the box scheme needs);
    orders are taken with respect to the actual ``dx`` ratios.
    """
    _check_levels(levels)
    if n0 % 2 == 0:
        raise ValueError("n0 must be odd")
    p = FamilyParams(1.0, 0.0, a)
    rows = []
    for lev in range(levels):
        n = (n0 - 1) * 2**lev + 1
        steps = steps0 * 2**lev
        grid = PeriodicGrid(n, length)
        dt = t_end / steps
        u0 = Field(grid, kdv_soliton(k, a, grid.x, 0.0, length, x0))
        _, states, _ = box_simulate(u0, p, dt, t_end, newton, snapshot_every=steps)
        exact = kdv_soliton(k, a, grid.x, t_end, length, x0)
        err = float(np.max(np.abs(states[-1].z[U] - exact)))
        rows.append(OrderRow(lev, n, grid.dx, dt, err))
    return _fill_orders(rows, "dx")


def rk4_temporal_study(levels: int = 4, n: int = 64, length: float = 2 * math.pi,
                       p: FamilyParams = FamilyParams(1.0, 1.0, 0.0), u0: Field | None = None,
                       dt0: float = 0.1, t_end: float = 1.0, ref_factor: int = 8) -> list[OrderRow]:
    """Temporal order of the reference RK4 at frozen spatial resolution.

    Errors are measured against a run with ``dt = dt_finest / ref_factor``.
    """
    _check_levels(levels)
    grid = PeriodicGrid(n, length)
    if u0 is None:
        theta = grid.x * (2 * np.pi / length)
        u0 = Field(grid, 0.5 * np.sin(theta) + 0.25 * np.cos(2 * theta))
    m0 = momentum_from_velocity(u0, p)
    dts = [dt0 / 2**lev for lev in range(levels)]
    ref = rk4_simulate(m0, p, dts[-1] / ref_factor, t_end, snapshot_every=10**9)
    rows = []
    for lev, dt in enumerate(dts):
        run = rk4_simulate(m0, p, dt, t_end, snapshot_every=10**9)
        rows.append(OrderRow(lev, n, grid.dx, dt, float(np.max(np.abs(run.u[-1] - ref.u[-1])))))
    return _fill_orders(rows, "dt")


def rows_to_columns(rows: list[OrderRow]) -> dict:
    return {name: [getattr(r, name) for r in rows] for name in ("level", "n", "dx", "dt", "error", "order")}


@dataclass
class StrongOrderResult:
    dts: np.ndarray
    errors: np.ndarray  # (seeds, levels): sup-in-time L-infinity distance per path
    slope: float

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def level_orders(self) -> list:
        e = self.mean_errors
        return [math.log2(e[i] / e[i + 1]) for i in range(e.size - 1)]


def sde_shift_study(levels: int = 4, seeds=range(16), n: int = 96, length: float = 60.0, k: float = 0.5,
                    a: float = 1.0, gamma: float = 0.5, dt0: float = 4e-3, t_end: float = 0.5) -> StrongOrderResult:
    """Strong error of the Heun run against the exact shifted soliton under constant noise.

    Each seed draws a coarse path which is refined by Brownian bridges, so the
    levels see the same realisation. The order is the least-squares slope of
    log(ensemble-mean error) against log(dt).
    """
    from .stochastic import BrownianPath, NoiseSpec, shifted_reference, simulate_sde
    from .solver import soliton_field

    _check_levels(levels)
    grid = PeriodicGrid(n, length)
    p = FamilyParams(1.0, 0.0, a)
    m0 = momentum_from_velocity(soliton_field(grid, k, a, x0=0.4 * length), p)
    noise = NoiseSpec.constant(grid, gamma)
    dts = dt0 / 2.0 ** np.arange(levels)
    dets = [rk4_simulate(m0, p, dt, t_end) for dt in dts]
    seeds = list(seeds)
    errors = np.zeros((len(seeds), levels))
    for i, seed in enumerate(seeds):
        base = BrownianPath.sample(seed, dt0, t_end)
        for lev in range(levels):
            path = base.refined(lev)
            run = simulate_sde(m0, p, noise, path.dt, t_end, path=path)
            ref = shifted_reference(dets[lev], gamma, path)
            errors[i, lev] = np.max(np.abs(run.trajectory.u - ref.u))
    slope = float(np.polyfit(np.log(dts), np.log(errors.mean(axis=0)), 1)[0])
    return StrongOrderResult(dts, errors, slope)
