import numpy as np
import pytest

from virbott.algebra import FamilyParams, clebsch_momentum_map
from virbott.diffeo import CircleDiffeo
from virbott.grid import Field, PeriodicGrid
from virbott.msi import clebsch_residual
from virbott.solver import momentum_from_velocity, rk4_simulate
from virbott.variations import (VariationPair, clebsch_tangent_simulate, density_series, perturb_variation,
                                pi_from_momentum, symplecticity_residual)
from virbott.verify import _smooth_tangents, orders_from, symplecticity_errors

P = FamilyParams(1.0, 1.0, 1.0)


def _u0(grid):
    return Field(grid, 0.5 * np.sin(grid.x) + 0.2 * np.cos(2 * grid.x))


@pytest.fixture(scope="module")
def traj():
    g = PeriodicGrid(64)
    return clebsch_tangent_simulate(momentum_from_velocity(_u0(g), P), P, 0.01, 0.2, _smooth_tangents(g))


def test_base_flow_matches_reference(traj):
    g = traj.grid
    ref = rk4_simulate(momentum_from_velocity(_u0(g), P), P, 0.01, 0.2)
    assert np.max(np.abs(ref.u - traj.u)) < 1e-12


def test_pi_inverts_momentum_map(traj):
    g = traj.grid
    k = len(traj.times) - 1
    M = clebsch_momentum_map(CircleDiffeo(g, traj.d[k]), Field(g, traj.pi[k]), P.a)
    assert np.max(np.abs(M.m.values - traj.m[k])) < 1e-11


def _clebsch_rows_mid(dt):
    g = PeriodicGrid(64)
    t = clebsch_tangent_simulate(momentum_from_velocity(_u0(g), P), P, dt, 0.2)
    k = len(t.times) // 2
    cd = lambda a: Field(g, (a[k + 1] - a[k - 1]) / (2 * dt))
    rows = clebsch_residual(Field(g, t.u[k]), CircleDiffeo(g, t.d[k]), Field(g, t.pi[k]),
                            cd(t.u), cd(t.d), cd(t.pi), P)
    return [r.max_abs() for r in rows]


def test_clebsch_rows_vanish_at_second_order():
    coarse, fine = _clebsch_rows_mid(0.02), _clebsch_rows_mid(0.01)
    assert coarse[0] < 1e-11 and fine[0] < 1e-11  # momentum row holds by construction
    for i in (1, 2):
        assert np.log2(coarse[i] / fine[i]) > 1.8


def test_tangents_are_first_variations():
    g = PeriodicGrid(32)
    m0 = momentum_from_velocity(_u0(g), P)
    dm, dl = _smooth_tangents(g)[0]
    t = clebsch_tangent_simulate(m0, P, 0.02, 0.2, [(dm, dl)])
    eps = 1e-6
    plus = clebsch_tangent_simulate(Field(g, m0.values + eps * dm), P, 0.02, 0.2, l0_disp=eps * dl)
    minus = clebsch_tangent_simulate(Field(g, m0.values - eps * dm), P, 0.02, 0.2, l0_disp=-eps * dl)
    for key, base in (("l", "d"), ("u", "u"), ("pi", "pi")):
        fd = (getattr(plus, base)[-1] - getattr(minus, base)[-1]) / (2 * eps)
        assert np.max(np.abs(fd - t.variations[0][key][-1])) < 1e-7


def test_zero_variations_give_zero_residual():
    g = PeriodicGrid(32)
    zero = np.zeros(g.n)
    t = clebsch_tangent_simulate(momentum_from_velocity(_u0(g), P), P, 0.02, 0.1, [(zero, zero), (zero, zero)])
    assert np.max(np.abs(symplecticity_residual(t))) == 0.0


def test_density_swap(traj):
    F, G = density_series(traj, VariationPair(0, 1))
    F2, G2 = density_series(traj, VariationPair(1, 0))
    assert np.allclose(F, -F2, atol=1e-15) and np.allclose(G, -G2, atol=1e-13)


def test_residual_needs_uniform_snapshots(traj):
    short = type(traj)(traj.grid, traj.params, traj.times[:2], traj.m[:2], traj.u[:2], traj.d[:2],
                       traj.pi[:2], [{k: v[:2] for k, v in var.items()} for var in traj.variations])
    with pytest.raises(ValueError):
        symplecticity_residual(short)
    bent = type(traj)(traj.grid, traj.params, traj.times ** 2, traj.m, traj.u, traj.d, traj.pi, traj.variations)
    with pytest.raises(ValueError):
        symplecticity_residual(bent)


def test_symplecticity_second_order():
    orders = orders_from(symplecticity_errors())
    assert min(orders) >= 1.8, orders


def test_negative_control_stays_order_one(traj, rng):
    bad = perturb_variation(traj, 1, rng)
    good = np.max(np.abs(symplecticity_residual(traj)))
    worse = np.max(np.abs(symplecticity_residual(bad)))
    assert worse > 1e-2 and worse > 100 * good
