import numpy as np
import pytest

from virbott.algebra import FamilyParams
from virbott.diffeo import CircleDiffeo, MonotonicityError
from virbott.grid import Field, PeriodicGrid
from virbott.msi import (COMPONENTS, DELTA, JetSample, VariationJet, clebsch_residual, flux_jacobian,
                         flux_matrix, grad_H, hamiltonian, hess_H, init_from_velocity, jet_from_fields,
                         mass_matrix, msi_residual, project_jet, reduce_state, symplectic_density,
                         bridges_clebsch_gap)
from virbott.random_fields import band_limited_field, random_diffeo

P_FULL = FamilyParams(1.0, 0.7, 1.3)
VAR = ("l", "u", "pi", "l_x", "u_x", "l_xx", "u_xx")


def random_state(rng, dim=7):
    z = rng.normal(size=dim)
    if dim == 7:
        z[DELTA] = rng.uniform(0.5, 2.0)
    return z


def test_mass_matrix():
    M = mass_matrix()
    assert M[0, 2] == 1 and M[2, 0] == -1
    assert np.count_nonzero(M) == 2
    assert np.array_equal(M, -M.T)
    assert np.linalg.matrix_rank(M) == 2


def test_flux_matrix_entries(rng):
    z = random_state(rng)
    z[DELTA] = 1.0
    K = flux_matrix(z, FamilyParams(1, 0, 1))
    assert K[0, 6] == -0.5
    assert K[0, 1] == z[2] and K[0, 2] == z[1]
    assert K[0, 3] == pytest.approx(0.5 * z[6])
    assert K[1, 5] == 0.5 and K[3, 4] == 0.5


def test_reduced_flux_matrix():
    K = flux_matrix(np.array([0.1, 0.2, 0.3, 0.4]), FamilyParams(1, 1, 0))
    assert K.shape == (4, 4) and K[1, 3] == 1.0


@pytest.mark.parametrize("dim, p", [(7, P_FULL), (4, FamilyParams(1, 1, 0)), (3, FamilyParams(1, 0, 0))])
def test_flux_antisymmetric(dim, p, rng):
    for _ in range(5):
        K = flux_matrix(random_state(rng, dim), p)
        assert np.array_equal(K, -K.T)


def test_grad_H_example():
    z = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    p = FamilyParams(1, 0, 1)
    assert np.allclose(grad_H(z, p), [0, 1, 0, 0, 0, 0, 0.5], atol=0)
    assert hamiltonian(z, p) == 0.5


def test_grad_H_zero_params(rng):
    assert np.all(grad_H(random_state(rng), FamilyParams(0, 0, 0)) == 0)


def _fd_jac(f, z, h=1e-5):
    cols = []
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h * max(1.0, abs(z[i]))
        cols.append((f(z + e) - f(z - e)) / (2 * e[i]))
    return np.array(cols).T


@pytest.mark.parametrize("trial", range(5))
def test_grad_and_hessian_against_finite_differences(trial, rng):
    z = random_state(rng)
    g = grad_H(z, P_FULL)
    fd = _fd_jac(lambda y: np.atleast_1d(hamiltonian(y, P_FULL)), z)[0]
    assert np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))) <= 1e-7
    Hfd = _fd_jac(lambda y: grad_H(y, P_FULL), z)
    assert np.allclose(hess_H(z, P_FULL), Hfd, rtol=1e-6, atol=1e-7)
    w = rng.normal(size=7)
    Jfd = _fd_jac(lambda y: flux_matrix(y, P_FULL) @ w, z)
    assert np.allclose(flux_jacobian(z, w, P_FULL), Jfd, rtol=1e-6, atol=1e-7)


def test_delta_guard(rng):
    z = random_state(rng)
    z[DELTA] = 0.0
    with pytest.raises(MonotonicityError):
        flux_matrix(z, P_FULL)
    with pytest.raises(MonotonicityError):
        grad_H(z, P_FULL)


def test_project_jet_example():
    x = 0.7
    j = JetSample(np.float64(x), 1.0, 0.0, 0.0, np.sin(x), np.cos(x), -np.sin(x), -np.cos(x),
                  np.cos(x), -np.sin(x), -np.cos(x), np.sin(x))
    assert np.allclose(project_jet(j), [x, np.sin(x), np.cos(x), 1, np.cos(x), 0, -np.sin(x)], atol=0)
    assert np.all(project_jet(JetSample.zero()) == 0)


def test_msi_residual_trivial_state():
    g = PeriodicGrid(16)
    z = np.zeros((7, g.n))
    z[0] = g.x
    z[DELTA] = 1.0
    z_x = np.zeros_like(z)
    z_x[0] = 1.0
    res = msi_residual(z, np.zeros_like(z), z_x, P_FULL)
    assert np.max(np.abs(res)) == 0.0


def test_algebraic_rows_detect_inconsistent_delta(rng):
    g = PeriodicGrid(64)
    j = jet_from_fields(random_diffeo(g, rng, 3, 0.4), band_limited_field(g, rng, 6), band_limited_field(g, rng, 6))
    z = project_jet(j)
    z_t = np.zeros_like(z)
    z_x = np.array([j.l_x, j.u_x, j.pi_x, j.l_xx, j.u_xx, j.l_xxx, j.u_xxx])
    base = msi_residual(z, z_t, z_x, P_FULL)
    assert np.max(np.abs(base[3:])) < 1e-12
    z[DELTA] = z[DELTA] * 1.1
    assert np.max(np.abs(msi_residual(z, z_t, z_x, P_FULL)[3:])) > 1e-3


@pytest.mark.parametrize("p", [P_FULL, FamilyParams(1, 0, 1), FamilyParams(1, 1, 0), FamilyParams(1, 0, 0)])
def test_bridges_clebsch_equivalence_on_arbitrary_jets(p, rng):
    g = PeriodicGrid(64)
    fields = [band_limited_field(g, rng, 6) for _ in range(4)]
    j = jet_from_fields(random_diffeo(g, rng, 3, 0.4), fields[0], fields[1],
                        l_t=fields[2], u_t=fields[3], pi_t=band_limited_field(g, rng, 6))
    gap = bridges_clebsch_gap(j, p)
    assert gap["dynamic"] <= 1e-9 and gap["algebraic"] <= 1e-9


@pytest.mark.parametrize("p, dim", [(FamilyParams(1, 1, 0), 4), (FamilyParams(1, 0, 0), 3)])
def test_reduced_systems_match_full_rows(p, dim, rng):
    z = random_state(rng)
    z_t, z_x = rng.normal(size=7), rng.normal(size=7)
    full = msi_residual(z, z_t, z_x, p)
    red = msi_residual(*(reduce_state(v, p) for v in (z, z_t, z_x)), p)
    assert np.array_equal(reduce_state(full, p), red)


def test_clebsch_residual_trivial():
    g = PeriodicGrid(32)
    zero = Field.zeros(g)
    rows = clebsch_residual(zero, CircleDiffeo.identity(g), zero, zero, zero, zero, P_FULL)
    assert all(r.max_abs() == 0.0 for r in rows)


@pytest.mark.parametrize("p, factor", [(FamilyParams(1, 0, 1), -1.0), (FamilyParams(1, 1, 0), -2.0)])
def test_init_from_velocity(p, factor):
    g = PeriodicGrid(64)
    u0 = Field.from_function(g, np.sin)
    st = init_from_velocity(u0, p)
    assert np.max(np.abs(st.pi.values - factor * np.sin(g.x))) < 1e-12
    assert st.theta == 0.0 and st.lam == p.a
    zero = Field.zeros(g)
    rows = clebsch_residual(u0, st.l, st.pi, zero, Field(g, -u0.values), zero, p)
    assert rows[0].max_abs() < 1e-10 and rows[1].max_abs() < 1e-13
    assert init_from_velocity(zero, p).pi.max_abs() == 0.0


def transcribed_G_table(j, beta, a):
    """Coefficient matrix C with G = sum C[i, k] W^i V^k, transcribed term by term."""
    idx = {n: i for i, n in enumerate(VAR)}
    C = np.zeros((7, 7))

    def pair(first, second, coef):
        C[idx[first], idx[second]] += coef
        C[idx[second], idx[first]] -= coef

    lx = j.l_x
    pair("l", "u", -j.pi)
    pair("l", "pi", -j.u)
    pair("l", "l_x", -0.5 * a * j.u_xx / lx**2)
    pair("l", "u_xx", 0.5 * a / lx)
    pair("u", "u_x", -beta)
    pair("u", "l_x", 0.5 * a * j.l_xx / lx**2)
    pair("u", "l_xx", -0.5 * a / lx)
    pair("l_x", "u_x", -0.5 * a / lx)
    return C


def test_symplectic_density_unit_probes(rng):
    vals = rng.normal(size=12)
    vals[1] = 1.4  # l_x
    j = JetSample(*vals)
    beta, a = 0.6, 1.7
    C = transcribed_G_table(j, beta, a)
    for i, wi in enumerate(VAR):
        for k, vk in enumerate(VAR):
            F, G = symplectic_density(VariationJet.unit(vk), VariationJet.unit(wi), j, beta, a)
            assert abs(G - C[i, k]) < 1e-12
            want_F = -1.0 if (wi, vk) == ("l", "pi") else 1.0 if (wi, vk) == ("pi", "l") else 0.0
            assert F == want_F


def test_symplectic_density_antisymmetry(rng):
    g = PeriodicGrid(32)
    j = jet_from_fields(random_diffeo(g, rng, 3, 0.3), band_limited_field(g, rng, 5), band_limited_field(g, rng, 5))
    V = VariationJet.from_fields(g, *(band_limited_field(g, rng, 5).values for _ in range(3)))
    W = VariationJet.from_fields(g, *(band_limited_field(g, rng, 5).values for _ in range(3)))
    F, G = symplectic_density(V, W, j, 0.5, 1.0)
    F2, G2 = symplectic_density(W, V, j, 0.5, 1.0)
    assert np.array_equal(F, -F2) and np.allclose(G, -G2, rtol=0, atol=1e-14)
    F0, G0 = symplectic_density(V, V, j, 0.5, 1.0)
    assert np.max(np.abs(F0)) == 0 and np.max(np.abs(G0)) < 1e-14


def test_components_order():
    assert COMPONENTS == ("l", "u", "pi", "Delta", "Theta", "Xi", "Pi")
