"""Virasoro algebra: bracket, L2 pairing, coadjoint action and the Clebsch momentum map.

Elements are pairs ``(u, a)`` of a periodic vector field and a central
coordinate. The pairing is ``<(m, b), (u, a)> = a*b + int m u dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffeo import CircleDiffeo, check_slope
from .grid import Field, GridMismatchError, check_same_grid, quadrature, spectral_deriv


@dataclass(frozen=True)
class FamilyParams:
    """Coefficients of ``alpha(u_t + 3uu_x) - beta(u_xxt + 2u_x u_xx + u u_xxx) + a u_xxx = 0``."""

    alpha: float
    beta: float
    a: float

    def __post_init__(self):
        for name in ("alpha", "beta", "a"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {val}")

    @property
    def dynamic(self) -> bool:
        return self.alpha + self.beta > 0

    def require_dynamic(self) -> None:
        if not self.dynamic:
            raise ValueError("alpha + beta must be positive for the dynamics")


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    u: Field
    a: float = 0.0


@dataclass(frozen=True, eq=False)
class DualElement:
    m: Field
    b: float = 0.0


_grid = check_same_grid


def ad(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    """Bracket ``[(u,a),(v,b)] = (-u v_x + u_x v, int u_x v_xx dx)``."""
    _grid(X.u, Y.u)
    u, v = X.u, Y.u
    ux = spectral_deriv(u, 1)
    field = -u * spectral_deriv(v, 1) + ux * v
    central = quadrature(ux * spectral_deriv(v, 2))
    return AlgebraElement(field, central)


def pair(M: DualElement, X: AlgebraElement) -> float:
    _grid(M.m, X.u)
    return M.b * X.a + quadrature(M.m * X.u)


def coad(X: AlgebraElement, M: DualElement) -> DualElement:
    """``ad*_(u,a)(m,b) = (2 m u_x + u m_x + b u_xxx, 0)``."""
    _grid(X.u, M.m)
    u, m = X.u, M.m
    field = 2.0 * m * spectral_deriv(u, 1) + u * spectral_deriv(m, 1) + M.b * spectral_deriv(u, 3)
    return DualElement(field, 0.0)


def var_derivative(X: AlgebraElement, p: FamilyParams) -> DualElement:
    """Variational derivative of ``a^2/2 + 1/2 int(alpha u^2 + beta u_x^2)``."""
    m = p.alpha * X.u
    if p.beta:
        m = m - p.beta * spectral_deriv(X.u, 2)
    return DualElement(m, X.a)


def ep_residual(u: Field, u_t: Field, p: FamilyParams) -> Field:
    """Pointwise residual of the family equation given a supplied time derivative."""
    _grid(u, u_t)
    ux = spectral_deriv(u, 1)
    uxx = spectral_deriv(u, 2)
    uxxx = spectral_deriv(u, 3)
    res = p.alpha * (u_t + 3.0 * u * ux)
    res = res - p.beta * (spectral_deriv(u_t, 2) + 2.0 * ux * uxx + u * uxxx)
    return res + p.a * uxxx


def _log_slope_curvature(l: CircleDiffeo) -> tuple[np.ndarray, np.ndarray]:
    lx = l.slope()
    check_slope(lx)
    return lx, l.deriv(2)


def clebsch_momentum_map(l: CircleDiffeo, pi: Field, lam: float) -> DualElement:
    """``(-pi l_x + (lam/2) d/dx(l_xx / l_x), lam)``."""
    if l.grid != pi.grid:
        raise GridMismatchError("l and pi must share a grid")
    grid = pi.grid
    lx, lxx = _log_slope_curvature(l)
    m = -pi.values * lx + 0.5 * lam * grid.diff(lxx / lx, 1)
    return DualElement(Field(grid, m), lam)


def thm2_terms(u: Field, l: CircleDiffeo, pi: Field, lam: float) -> tuple[Field, Field]:
    """The two integrands whose sum cancels identically.

    ``A`` is the time derivative of the Clebsch momentum after the advection
    laws for ``l`` and ``pi`` have replaced every time derivative; ``B`` is the
    coadjoint action of ``(u, lam)`` on that same momentum.
    """
    grid = _grid(u, pi)
    if l.grid != grid:
        raise GridMismatchError("l must share the grid of u and pi")
    D = grid.diff
    lx, lxx = _log_slope_curvature(l)
    uv, pv = u.values, pi.values
    flux = uv * lx
    A = (0.5 * lam * D((-lx * D(flux, 2) + lxx * D(flux, 1)) / lx**2, 1)
         + lx * D(pv * uv - 0.5 * lam * D(uv, 2) / lx, 1)
         + pv * D(flux, 1))
    curv = D(lxx / lx, 1)
    B = ((lam * curv - 2.0 * pv * lx) * D(uv, 1)
         + uv * D(0.5 * lam * curv - pv * lx, 1)
         + lam * D(uv, 3))
    return Field(grid, A), Field(grid, B)


def thm2_identity(u: Field, l: CircleDiffeo, pi: Field, lam: float) -> Field:
    A, B = thm2_terms(u, l, pi, lam)
    return A + B
