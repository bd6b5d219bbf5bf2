import numpy as np
import pytest
import sympy as sp

from virbott.algebra import AlgebraElement, DualElement, FamilyParams, coad, ep_residual
from virbott.grid import Field, PeriodicGrid
from virbott.random_fields import band_limited_field
from virbott.solver import (SimulationAbort, family_rhs, kdv_soliton, kdv_soliton_dt, momentum_from_velocity,
                            observed_orders, pde_residual, peak_location, rk4_simulate, soliton_field,
                            Trajectory)

G = PeriodicGrid(64)


def test_constant_velocity_is_fixed_point():
    p = FamilyParams(1.0, 1.0, 0.0)
    assert family_rhs(Field.constant(G, 2.0), p).max_abs() < 1e-14


def test_kdv_rhs_example():
    p = FamilyParams(1.0, 0.0, 1.0)
    out = family_rhs(Field.from_function(G, np.sin), p)
    want = -1.5 * np.sin(2 * G.x) + np.cos(G.x)
    assert np.max(np.abs(out.values - want)) < 1e-10  # u_xxx round-off


@pytest.mark.parametrize("p", [FamilyParams(1, 0, 1), FamilyParams(1, 1, 0), FamilyParams(1, 1, 0.5),
                               FamilyParams(0.5, 2, 1)])
def test_rhs_matches_coadjoint_drift(p, rng):
    u = band_limited_field(G, rng, 8)  # band-limited so dealiasing does not act
    m = momentum_from_velocity(u, p)
    ref = -coad(AlgebraElement(u, p.a), DualElement(m, p.a)).m
    assert (family_rhs(m, p) - ref).max_abs() < 1e-11 * max(1.0, ref.max_abs())


def test_hunter_saxton_gauge():
    p = FamilyParams(0.0, 1.0, 0.0)
    m = momentum_from_velocity(Field.from_function(G, np.cos), p)
    r0 = family_rhs(m, p, mean_u=0.0)
    r1 = family_rhs(m, p, mean_u=0.3)
    assert not np.allclose(r0.values, r1.values)


def test_soliton_formula_solves_kdv_symbolically():
    x, t, k, a = sp.symbols("x t k a", positive=True)
    u = 4 * a * k**2 * sp.sech(k * (x - 4 * a * k**2 * t)) ** 2
    res = sp.diff(u, t) + 3 * u * sp.diff(u, x) + a * sp.diff(u, x, 3)
    assert sp.simplify(res.rewrite(sp.exp)) == 0


def test_soliton_examples():
    assert kdv_soliton(1.0, 1.0, 0.0, 0.0) == pytest.approx(4.0, abs=1e-15)
    g = PeriodicGrid(256, 40.0)
    f = Field(g, kdv_soliton(1.0, 1.0, g.x, 0.5, g.length, 0.0))
    assert abs((peak_location(f) + 20) % 40 - 22.0) < 1e-10
    assert np.max(kdv_soliton(1.0, 1e-6, g.x)) < 1e-5


def test_soliton_residual_oracle():
    g = PeriodicGrid(512, 40.0)
    p = FamilyParams(1, 0, 1)
    u = Field(g, kdv_soliton(1.0, 1.0, g.x, 0.0, 40.0, 20.0))
    ut = Field(g, kdv_soliton_dt(1.0, 1.0, g.x, 0.0, 40.0, 20.0))
    assert ep_residual(u, ut, p).max_abs() < 1e-8


def test_constant_trajectory_and_residual():
    p = FamilyParams(1, 1, 0.7)
    traj = rk4_simulate(momentum_from_velocity(Field.constant(G, 0.4), p), p, 0.01, 0.2)
    assert np.max(np.abs(traj.u - traj.u[0])) < 1e-12
    assert np.max(np.abs(pde_residual(traj))) < 1e-12


def test_pde_residual_needs_three_snapshots():
    p = FamilyParams(1, 0, 0)
    traj = rk4_simulate(Field.from_function(G, np.sin), p, 0.01, 0.01)
    with pytest.raises(ValueError):
        pde_residual(traj)


def test_exact_soliton_residual_order():
    g = PeriodicGrid(256, 40.0)
    p = FamilyParams(1, 0, 1)
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        times = np.array([0.0, h, 2 * h])
        u = np.array([kdv_soliton(1.0, 1.0, g.x, t, 40.0, 20.0) for t in times])
        errs.append(np.max(np.abs(pde_residual(Trajectory(g, p, times, u, u)))))
    assert min(observed_orders(errs)) >= 1.8


def test_soliton_speed_in_simulation():
    g = PeriodicGrid(256, 40.0)
    p = FamilyParams(1, 0, 1)
    u0 = soliton_field(g, 1.0, 1.0, x0=10.0)
    traj = rk4_simulate(u0, p, 1e-4, 1.0, snapshot_every=10_000)
    shift = (peak_location(traj.u_field(-1)) - peak_location(traj.u_field(0))) % 40.0
    assert shift == pytest.approx(4.0, abs=1e-3)
    assert traj.diagnostics.absolute_drift("mass") < 1e-11


def test_ch_energy_conservation():
    p = FamilyParams(1, 1, 0)
    u0 = Field.from_function(G, lambda x: 0.5 * np.sin(x) + 0.2 * np.cos(2 * x))
    traj = rk4_simulate(momentum_from_velocity(u0, p), p, 1e-2, 1.0, snapshot_every=100)
    assert traj.diagnostics.relative_drift("energy") <= 1e-8
    assert traj.diagnostics.absolute_drift("mass") <= 1e-11


def test_temporal_order_four():
    from virbott.convergence import rk4_temporal_study
    rows = rk4_temporal_study(levels=3, dt0=0.1)
    assert all(r.order > 3.7 for r in rows[1:])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_abort_reports_step():
    p = FamilyParams(1, 0, 1)
    u0 = Field.from_function(PeriodicGrid(128), lambda x: 3 * np.sin(x))
    with pytest.raises(SimulationAbort) as exc:
        rk4_simulate(u0, p, 0.5, 20.0)
    assert exc.value.step >= 1


@pytest.mark.parametrize("dt", [0.0, -1e-3])
def test_bad_dt(dt):
    with pytest.raises(ValueError):
        rk4_simulate(Field.from_function(G, np.sin), FamilyParams(1, 0, 0), dt, 1.0)
