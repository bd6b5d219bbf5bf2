"""Multisymplectic Hamiltonian form ``M z_t + K(z) z_x = grad H(z)`` and the Clebsch equations.

Phase-space coordinates are ``z = (l, u, pi, Delta, Theta, Xi, Pi)`` where on
solutions ``Delta = l_x``, ``Theta = u_x``, ``Xi = l_xx`` and ``Pi = u_xx``.
With ``a = 0`` the reduced systems are used: ``(l, u, pi, Theta)`` when
``beta > 0`` and ``(l, u, pi)`` for Burgers.

All pointwise functions take ``z`` with shape ``(d,)`` or ``(d, n)`` and
broadcast over trailing axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import FamilyParams
from .diffeo import CircleDiffeo, check_delta, check_slope
from .grid import Field, GridMismatchError, check_same_grid

L, U, P, DELTA, THETA, XI, PI2 = range(7)
COMPONENTS = ("l", "u", "pi", "Delta", "Theta", "Xi", "Pi")


def system_dim(p: FamilyParams) -> int:
    if p.a > 0:
        return 7
    return 4 if p.beta > 0 else 3


def _guard_delta(delta, p: FamilyParams):
    if p.a > 0:
        check_delta(delta)


def mass_matrix(dim: int = 7) -> np.ndarray:
    if dim not in (3, 4, 7):
        raise ValueError("system dimension must be 3, 4 or 7")
    M = np.zeros((dim, dim))
    M[L, P] = 1.0
    M[P, L] = -1.0
    return M


def flux_matrix(z, p: FamilyParams) -> np.ndarray:
    """State-dependent antisymmetric ``K(z)``; dimension follows ``len(z)``."""
    z = np.asarray(z, dtype=float)
    dim = z.shape[0]
    K = np.zeros((dim, dim) + z.shape[1:])
    K[L, U] = z[P]
    K[L, P] = z[U]
    if dim == 7:
        _guard_delta(z[DELTA], p)
        if p.a > 0:
            delta = z[DELTA]
            half_a = 0.5 * p.a
            K[L, DELTA] = half_a * z[PI2] / delta**2
            K[L, PI2] = -half_a / delta
            K[U, DELTA] = -half_a * z[XI] / delta**2
            K[U, XI] = half_a / delta
            K[DELTA, THETA] = half_a / delta
        K[U, THETA] = p.beta
    elif dim == 4:
        K[U, 3] = p.beta
    elif dim != 3:
        raise ValueError("state must have 3, 4 or 7 components")
    return K - np.swapaxes(K, 0, 1)


def hamiltonian(z, p: FamilyParams):
    z = np.asarray(z, dtype=float)
    dim = z.shape[0]
    H = 0.5 * p.alpha * z[U] ** 2
    if dim == 7:
        H = H - 0.5 * p.beta * z[THETA] ** 2
        if p.a > 0:
            _guard_delta(z[DELTA], p)
            H = H - 0.5 * p.a * z[THETA] * z[XI] / z[DELTA] + 0.5 * p.a * z[PI2]
    elif dim == 4:
        H = H - 0.5 * p.beta * z[3] ** 2
    return H


def grad_H(z, p: FamilyParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    dim = z.shape[0]
    g = np.zeros_like(z)
    g[U] = p.alpha * z[U]
    if dim == 7:
        g[THETA] = -p.beta * z[THETA]
        if p.a > 0:
            _guard_delta(z[DELTA], p)
            delta = z[DELTA]
            half_a = 0.5 * p.a
            g[DELTA] = half_a * z[THETA] * z[XI] / delta**2
            g[THETA] -= half_a * z[XI] / delta
            g[XI] = -half_a * z[THETA] / delta
            g[PI2] = half_a
    elif dim == 4:
        g[3] = -p.beta * z[3]
    return g


def hess_H(z, p: FamilyParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    dim = z.shape[0]
    Hs = np.zeros((dim, dim) + z.shape[1:])
    Hs[U, U] = p.alpha
    if dim == 7:
        Hs[THETA, THETA] = -p.beta
        if p.a > 0:
            delta = z[DELTA]
            half_a = 0.5 * p.a
            Hs[DELTA, DELTA] = -p.a * z[THETA] * z[XI] / delta**3
            Hs[DELTA, THETA] = Hs[THETA, DELTA] = half_a * z[XI] / delta**2
            Hs[DELTA, XI] = Hs[XI, DELTA] = half_a * z[THETA] / delta**2
            Hs[THETA, XI] = Hs[XI, THETA] = -half_a / delta
    elif dim == 4:
        Hs[3, 3] = -p.beta
    return Hs


def flux_jacobian(z, w, p: FamilyParams) -> np.ndarray:
    """Derivative of ``K(z) w`` with respect to ``z`` (``w`` held fixed)."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    dim = z.shape[0]
    J = np.zeros((dim, dim) + z.shape[1:])
    J[L, P] = w[U]
    J[L, U] = w[P]
    J[U, P] = -w[L]
    J[P, U] = -w[L]
    if dim == 7 and p.a > 0:
        delta = z[DELTA]
        half_a = 0.5 * p.a
        d2, d3 = delta**2, delta**3
        J[L, PI2] = half_a * w[DELTA] / d2
        J[L, DELTA] = -p.a * z[PI2] * w[DELTA] / d3 + half_a * w[PI2] / d2
        J[U, XI] = -half_a * w[DELTA] / d2
        J[U, DELTA] = p.a * z[XI] * w[DELTA] / d3 - half_a * w[XI] / d2
        J[DELTA, PI2] = -half_a * w[L] / d2
        J[DELTA, XI] = half_a * w[U] / d2
        J[DELTA, DELTA] = p.a * (z[PI2] * w[L] - z[XI] * w[U]) / d3 - half_a * w[THETA] / d2
        J[THETA, DELTA] = half_a * w[DELTA] / d2
        J[XI, DELTA] = half_a * w[U] / d2
        J[PI2, DELTA] = -half_a * w[L] / d2
    return J


def msi_residual(z, z_t, z_x, p: FamilyParams) -> np.ndarray:
    """Pointwise ``M z_t + K(z) z_x - grad H(z)``."""
    z = np.asarray(z, dtype=float)
    z_t = np.asarray(z_t, dtype=float)
    z_x = np.asarray(z_x, dtype=float)
    if not (z.shape == z_t.shape == z_x.shape):
        raise GridMismatchError("z, z_t and z_x must have identical shapes")
    M = mass_matrix(z.shape[0])
    K = flux_matrix(z, p)
    return np.einsum("ij,j...->i...", M, z_t) + np.einsum("ij...,j...->i...", K, z_x) - grad_H(z, p)


def reduce_state(z, p: FamilyParams) -> np.ndarray:
    """Restrict a 7-component state to the coordinates of the reduced system for ``p``."""
    z = np.asarray(z)
    dim = system_dim(p)
    if dim == 7:
        return z
    if dim == 4:
        return z[[L, U, P, THETA]]
    return z[[L, U, P]]


@dataclass(frozen=True, eq=False)
class JetSample:
    """Nodal values of ``(l, u, pi)``, their x-derivatives to order 3 and first t-derivatives.

    ``l`` holds the lifted map values ``x + d(x)``.
    """

    l: np.ndarray
    l_x: np.ndarray
    l_xx: np.ndarray
    l_xxx: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    u_xxx: np.ndarray
    pi: np.ndarray
    pi_x: np.ndarray
    pi_xx: np.ndarray
    pi_xxx: np.ndarray
    l_t: np.ndarray | float = 0.0
    u_t: np.ndarray | float = 0.0
    pi_t: np.ndarray | float = 0.0
    l_tx: np.ndarray | float = 0.0
    u_tx: np.ndarray | float = 0.0
    l_txx: np.ndarray | float = 0.0
    u_txx: np.ndarray | float = 0.0

    @classmethod
    def zero(cls, shape=()):
        return cls(*(np.zeros(shape) for _ in range(12)))


def jet_from_fields(l: CircleDiffeo, u: Field, pi: Field, l_t: Field | None = None,
                    u_t: Field | None = None, pi_t: Field | None = None) -> JetSample:
    """Spectral jet of the fields at every node (vectorised over the grid)."""
    grid = check_same_grid(u, pi)
    if l.grid != grid:
        raise GridMismatchError("l must share the grid of u and pi")
    D = grid.diff
    kw = {}
    if l_t is not None:
        kw.update(l_t=l_t.values, l_tx=D(l_t.values, 1), l_txx=D(l_t.values, 2))
    if u_t is not None:
        kw.update(u_t=u_t.values, u_tx=D(u_t.values, 1), u_txx=D(u_t.values, 2))
    if pi_t is not None:
        kw.update(pi_t=pi_t.values)
    uv, pv = u.values, pi.values
    return JetSample(l.values, l.slope(), l.deriv(2), l.deriv(3),
                     uv, D(uv, 1), D(uv, 2), D(uv, 3),
                     pv, D(pv, 1), D(pv, 2), D(pv, 3), **kw)


def project_jet(j: JetSample) -> np.ndarray:
    """``(l, u, pi, l_x, u_x, l_xx, u_xx)``."""
    return np.array([j.l, j.u, j.pi, j.l_x, j.u_x, j.l_xx, j.u_xx], dtype=float)


def jet_z_derivatives(j: JetSample) -> tuple[np.ndarray, np.ndarray]:
    """``(z_t, z_x)`` of the projected jet, read off the higher jet coordinates."""
    shape = np.shape(j.l)
    full = lambda v: np.broadcast_to(np.asarray(v, dtype=float), shape)
    z_t = np.array([full(j.l_t), full(j.u_t), full(j.pi_t), full(j.l_tx), full(j.u_tx),
                    full(j.l_txx), full(j.u_txx)])
    z_x = np.array([j.l_x, j.u_x, j.pi_x, j.l_xx, j.u_xx, j.l_xxx, j.u_xxx], dtype=float)
    return z_t, z_x


def clebsch_rows(j: JetSample, p: FamilyParams) -> np.ndarray:
    """Residuals of the three Clebsch equations evaluated on jet data.

    Rows: (i) ``alpha u - beta u_xx + pi l_x - (a/2) (l_xx/l_x)_x``;
    (ii) ``l_t + u l_x``; (iii) ``pi_t + (pi u - (a/2) u_xx/l_x)_x``.
    """
    lx = np.asarray(j.l_x)
    if p.a > 0:
        check_slope(lx)
    row1 = p.alpha * j.u - p.beta * j.u_xx + j.pi * lx
    row3 = j.pi_t + j.pi_x * j.u + j.pi * j.u_x
    if p.a > 0:
        half_a = 0.5 * p.a
        row1 = row1 - half_a * (j.l_xxx / lx - j.l_xx**2 / lx**2)
        row3 = row3 - half_a * (j.u_xxx / lx - j.u_xx * j.l_xx / lx**2)
    row2 = j.l_t + j.u * lx
    return np.array([row1, row2, row3])


def clebsch_residual(u: Field, l: CircleDiffeo, pi: Field, u_t: Field, l_t: Field, pi_t: Field,
                     p: FamilyParams) -> tuple[Field, Field, Field]:
    """Residuals (i)-(iii) of the separable Clebsch system with spectral x-derivatives.

    ``u_t`` is not used by the three rows; it is accepted so callers can pass a full jet.
    """
    grid = check_same_grid(u, pi, u_t, l_t, pi_t)
    rows = clebsch_rows(jet_from_fields(l, u, pi, l_t, u_t, pi_t), p)
    return tuple(Field(grid, r) for r in rows)


def clebsch_from_msi(res_msi: np.ndarray) -> np.ndarray:
    """Map the first three multisymplectic rows onto Clebsch rows (i), (ii), (iii).

    On jet data the ``pi``-row equals (iii), the ``u``-row equals ``-(i)`` and
    the ``l``-row equals ``-(ii)``.
    """
    return np.array([-res_msi[U], -res_msi[P], res_msi[L]])


def bridges_clebsch_gap(j: JetSample, p: FamilyParams) -> dict:
    """Compare Bridges-system and Clebsch residuals on the same jet data."""
    z = project_jet(j)
    z_t, z_x = jet_z_derivatives(j)
    zr, ztr, zxr = (reduce_state(v, p) for v in (z, z_t, z_x))
    res = msi_residual(zr, ztr, zxr, p)
    cle = clebsch_rows(j, p)
    diff = clebsch_from_msi(res) - cle
    scale = max(1.0, float(np.max(np.abs(cle))), float(np.max(np.abs(res[:3]))))
    algebraic = res[3:] if res.shape[0] > 3 else np.zeros(1)
    return {"dynamic": float(np.max(np.abs(diff))) / scale,
            "algebraic": float(np.max(np.abs(algebraic))) / scale}


@dataclass(frozen=True, eq=False)
class ClebschState:
    l: CircleDiffeo
    u: Field
    pi: Field
    theta: float
    lam: float


def init_from_velocity(u0: Field, p: FamilyParams) -> ClebschState:
    """Identity inverse map with ``pi0 = -(alpha u0 - beta u0_xx)``, ``theta0 = 0``, ``lambda = a``."""
    m = p.alpha * u0.values
    if p.beta:
        m = m - p.beta * u0.grid.diff(u0.values, 2)
    return ClebschState(CircleDiffeo.identity(u0.grid), u0, Field(u0.grid, -m), 0.0, p.a)


@dataclass(frozen=True, eq=False)
class VariationJet:
    """Components ``(V^1, V^2, V^3, V^1_1, V^2_1, V^1_11, V^2_11)`` of a vertical first variation."""

    l: np.ndarray
    u: np.ndarray
    pi: np.ndarray
    l_x: np.ndarray
    u_x: np.ndarray
    l_xx: np.ndarray
    u_xx: np.ndarray

    @classmethod
    def from_fields(cls, grid, dl, du, dpi) -> VariationJet:
        D = grid.diff
        return cls(dl, du, dpi, D(dl, 1), D(du, 1), D(dl, 2), D(du, 2))

    def projected(self) -> np.ndarray:
        return np.array([self.l, self.u, self.pi, self.l_x, self.u_x, self.l_xx, self.u_xx])

    @classmethod
    def unit(cls, name: str) -> VariationJet:
        vals = {c: 0.0 for c in ("l", "u", "pi", "l_x", "u_x", "l_xx", "u_xx")}
        vals[name] = 1.0
        return cls(**vals)


def symplectic_density(V: VariationJet, W: VariationJet, j: JetSample, beta: float, a: float):
    """``(F, G)`` densities of the symplecticity law for two first variations."""
    lx = np.asarray(j.l_x)
    if a > 0:
        check_delta(lx)
    F = -W.l * V.pi + W.pi * V.l
    G = (-j.pi * (W.l * V.u - W.u * V.l)
         - j.u * (W.l * V.pi - W.pi * V.l)
         - beta * (W.u * V.u_x - W.u_x * V.u))
    if a > 0:
        half_a = 0.5 * a
        G = G + (-half_a * j.u_xx / lx**2 * (W.l * V.l_x - W.l_x * V.l)
                 + half_a / lx * (W.l * V.u_xx - W.u_xx * V.l)
                 + half_a * j.l_xx / lx**2 * (W.u * V.l_x - W.l_x * V.u)
                 - half_a / lx * (W.u * V.l_xx - W.l_xx * V.u)
                 - half_a / lx * (W.l_x * V.u_x - W.u_x * V.l_x))
    return F, G
