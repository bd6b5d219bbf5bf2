"""Verification suite: every identity of the formulation checked numerically.

Each property measures one number. ``max`` properties pass when the value is
at most the tolerance; ``min`` properties (observed orders) pass when it is at
least the tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import AlgebraElement, DualElement, FamilyParams, ad, coad, ep_residual, pair, thm2_terms
from .convergence import box_soliton_study
from .diffeo import CircleDiffeo
from .grid import Field, PeriodicGrid
from .msi import VariationJet, flux_matrix, mass_matrix, reduce_state, symplectic_density, bridges_clebsch_gap
from .random_fields import band_limited_field, random_diffeo, random_jet
from .reconstruction import (GroupElement, VelocityHistory, advect_inverse_map, bott_cocycle,
                             cocycle_rate_fd, forward_map_from_velocity, group_compose,
                             mutual_inverse_error, theta_reconstruct)
from .solver import (kdv_soliton, kdv_soliton_dt, momentum_from_velocity, rk4_simulate, soliton_field)
from .stochastic import NoiseSpec, coad_noise_term, expanded_noise_term, j_operator, stochastic_symplectic_density
from .variations import clebsch_tangent_simulate, symplecticity_residual


def _rel(diff, *terms) -> float:
    scale = max([1.0] + [float(np.max(np.abs(t))) for t in terms])
    return float(np.max(np.abs(diff))) / scale


# measurements ---------------------------------------------------------------

def duality_defect(n: int = 128, trials: int = 100, seed: int = 0, kmax: int = 16) -> float:
    """max |<ad*_X M, Y> - <M, ad_X Y>| over random band-limited triples."""
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        X = AlgebraElement(band_limited_field(grid, rng, kmax, decay=2.0), rng.normal())
        Y = AlgebraElement(band_limited_field(grid, rng, kmax, decay=2.0), rng.normal())
        M = DualElement(band_limited_field(grid, rng, kmax, decay=2.0), rng.normal())
        worst = max(worst, abs(pair(coad(X, M), Y) - pair(M, ad(X, Y))))
    return worst


def jacobi_defect(n: int = 128, trials: int = 100, seed: int = 1, kmax: int = 12) -> float:
    """Componentwise relative defect of the Jacobi identity including the cocycle slot."""
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        X, Y, Z = (AlgebraElement(band_limited_field(grid, rng, kmax, decay=2.0), rng.normal()) for _ in range(3))
        terms = [ad(X, ad(Y, Z)), ad(Y, ad(Z, X)), ad(Z, ad(X, Y))]
        field_sum = sum(t.u.values for t in terms)
        central_sum = sum(t.a for t in terms)
        worst = max(worst, _rel(field_sum, *(t.u.values for t in terms)),
                    abs(central_sum) / max(1.0, *(abs(t.a) for t in terms)))
    return worst


def thm2_defect(n: int = 256, trials: int = 50, seed: int = 2, kmax: int = 8) -> float:
    """max |A + B| relative to max(|A|, |B|) for random admissible (u, l, pi, lambda)."""
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = band_limited_field(grid, rng, kmax)
        pi = band_limited_field(grid, rng, kmax)
        l = random_diffeo(grid, rng, kmax=4, strength=0.5)
        lam = rng.uniform(0.1, 3.0)
        A, B = thm2_terms(u, l, pi, lam)
        worst = max(worst, _rel((A + B).values, A.values, B.values))
    return worst


def thm3_defect(p: FamilyParams, samples: int = 200, seed: int = 3) -> float:
    """Worst of the dynamic-row and algebraic-row gaps between the Bridges and Clebsch residuals."""
    rng = np.random.default_rng(seed)
    j = random_jet(rng, (samples,))
    gap = bridges_clebsch_gap(j, p)
    return max(gap["dynamic"], gap["algebraic"])


def flux_antisymmetry_defect(samples: int = 100, seed: int = 4) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in (FamilyParams(1.0, 1.0, 1.0), FamilyParams(1.0, 1.0, 0.0), FamilyParams(1.0, 0.0, 0.0)):
        z = rng.normal(size=(7, samples))
        z[3] = rng.uniform(0.5, 2.0, samples)
        K = flux_matrix(reduce_state(z, p), p)
        M = mass_matrix(K.shape[0])
        worst = max(worst, float(np.max(np.abs(K + np.swapaxes(K, 0, 1)))), float(np.max(np.abs(M + M.T))))
    return worst


def soliton_residual(n: int = 512, length: float = 40.0, k: float = 1.0, a: float = 1.0, t: float = 0.3) -> float:
    """Residual of the family equation on the sampled soliton with its analytic time derivative."""
    grid = PeriodicGrid(n, length)
    x0 = 0.5 * length
    u = Field(grid, kdv_soliton(k, a, grid.x, t, length, x0))
    ut = Field(grid, kdv_soliton_dt(k, a, grid.x, t, length, x0))
    return float(ep_residual(u, ut, FamilyParams(1.0, 0.0, a)).max_abs())


def conservation_drifts(p: FamilyParams, n: int = 128, dt: float = 1e-3, t_end: float = 1.0) -> dict:
    """Mass drift (absolute) and energy drift (relative) of the reference solver on a smooth run."""
    grid = PeriodicGrid(n)
    u0 = Field(grid, 0.5 * np.sin(grid.x) + 0.25 * np.cos(2 * grid.x) + 0.1 * np.sin(3 * grid.x + 0.3))
    traj = rk4_simulate(momentum_from_velocity(u0, p), p, dt, t_end, snapshot_every=10**9)
    return {"mass": traj.diagnostics.absolute_drift("mass"), "energy": traj.diagnostics.relative_drift("energy")}


def _smooth_tangents(grid: PeriodicGrid):
    x = grid.x
    return [(0.1 * np.cos(x), 0.05 * np.sin(2 * x)), (0.1 * np.sin(3 * x) + 0.05, 0.05 * np.cos(x))]


def symplecticity_errors(levels=((32, 0.04), (64, 0.02), (128, 0.01)), t_end: float = 0.4,
                         p: FamilyParams = FamilyParams(1.0, 1.0, 1.0)) -> list:
    """max |d_t F + d_x G| at t_end/2 for simultaneous (dt, dx) halving."""
    errs = []
    for n, dt in levels:
        grid = PeriodicGrid(n)
        u0 = Field(grid, 0.5 * np.sin(grid.x) + 0.2 * np.cos(2 * grid.x))
        traj = clebsch_tangent_simulate(momentum_from_velocity(u0, p), p, dt, t_end, _smooth_tangents(grid))
        res = symplecticity_residual(traj)
        mid = int(round(0.5 * t_end / dt))
        errs.append(float(np.max(np.abs(res[mid - 1]))))
    return errs


def orders_from(errors, ratio: float = 2.0) -> list:
    return [math.log(errors[i - 1] / errors[i]) / math.log(ratio) for i in range(1, len(errors))]


def cocycle_identity_defect(n: int = 128, trials: int = 20, seed: int = 5) -> float:
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        p1, p2, p3 = (random_diffeo(grid, rng, kmax=3, strength=0.4) for _ in range(3))
        val = (bott_cocycle(p2, p3) - bott_cocycle(p1.compose(p2), p3)
               + bott_cocycle(p1, p2.compose(p3)) - bott_cocycle(p1, p2))
        worst = max(worst, abs(val))
    return worst


def cocycle_unit_defect(n: int = 128, trials: int = 20, seed: int = 6) -> float:
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    ident = CircleDiffeo.identity(grid)
    worst = 0.0
    for _ in range(trials):
        psi = random_diffeo(grid, rng, kmax=4, strength=0.5)
        worst = max(worst, abs(bott_cocycle(ident, psi)), abs(bott_cocycle(psi, ident)))
    return worst


def associativity_defect(n: int = 128, trials: int = 20, seed: int = 7) -> float:
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        g1, g2, g3 = (GroupElement(random_diffeo(grid, rng, kmax=3, strength=0.4), rng.normal()) for _ in range(3))
        left = group_compose(group_compose(g1, g2), g3)
        right = group_compose(g1, group_compose(g2, g3))
        worst = max(worst, abs(left.theta - right.theta),
                    float(np.max(np.abs(left.psi.displacement - right.psi.displacement))))
    return worst


def soliton_mutual_inverse(n: int = 256, length: float = 80.0, k: float = 0.5, dt: float = 1e-3,
                           t_end: float = 1.0) -> float:
    p = FamilyParams(1.0, 0.0, 1.0)
    grid = PeriodicGrid(n, length)
    u0 = soliton_field(grid, k, 1.0, 0.0, x0=0.3 * length)
    traj = rk4_simulate(momentum_from_velocity(u0, p), p, dt, t_end)
    hist = VelocityHistory.from_trajectory(traj)
    _, psis = forward_map_from_velocity(hist)
    _, ls = advect_inverse_map(CircleDiffeo.identity(grid), hist)
    return max(mutual_inverse_error(a, b) for a, b in zip(psis, ls))


def cocycle_rate_gaps(spacings=(0.04, 0.02, 0.01, 0.005), n: int = 256, length: float = 80.0, k: float = 0.5,
                      dt: float = 5e-4, t_end: float = 0.6, t_probe: float = 0.3) -> list:
    """|r(t) - centered difference of B(psi(s), l(t))| at ``t_probe`` for velocity sampled at each spacing.

    One fine soliton run is subsampled, so only the reconstruction step size changes.
    """
    p = FamilyParams(1.0, 0.0, 1.0)
    grid = PeriodicGrid(n, length)
    u0 = soliton_field(grid, k, 1.0, 0.0, x0=0.3 * length)
    base = rk4_simulate(momentum_from_velocity(u0, p), p, dt, t_end)
    gaps = []
    for h in spacings:
        every = int(round(h / dt))
        hist = VelocityHistory(grid, base.times[::every], base.u[::every])
        times, psis = forward_map_from_velocity(hist)
        _, ls = advect_inverse_map(CircleDiffeo.identity(grid), hist)
        _, _, r = theta_reconstruct(hist, (times, ls), p.a)
        j = int(round(t_probe / h))
        if not 0 < j < len(times) - 1:
            raise ValueError(f"probe time {t_probe} needs a neighbour on each side at spacing {h}")
        gaps.append(abs(r[j] - cocycle_rate_fd(psis[j - 1], psis[j + 1], ls[j], h)))
    return gaps


def sde_formulation_defect(n: int = 128, trials: int = 20, seed: int = 8, kmax: int = 16) -> float:
    """Pairwise relative disagreement of the expanded, coadjoint and J forms of the noise term."""
    grid = PeriodicGrid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        p = FamilyParams(rng.uniform(0.5, 2), rng.uniform(0, 2), rng.uniform(0, 2))
        u = band_limited_field(grid, rng, kmax, decay=2.0)
        xi = band_limited_field(grid, rng, kmax, decay=2.0)
        m = momentum_from_velocity(u, p)
        e = expanded_noise_term(u, xi, p).values
        c = coad_noise_term(m, xi, p.a).values
        j = j_operator(m, xi, p.a).values
        worst = max(worst, _rel(e - c, e, c), _rel(e - j, e, j), _rel(c - j, c, j))
    return worst


def gbar_constant_defect(samples: int = 64, seed: int = 9, gamma: float = 0.5) -> float:
    """``Gbar = gamma F`` for spatially constant noise."""
    grid = PeriodicGrid(samples)
    rng = np.random.default_rng(seed)
    j = random_jet(rng, (samples,))
    V = VariationJet(*(rng.normal(size=samples) for _ in range(7)))
    W = VariationJet(*(rng.normal(size=samples) for _ in range(7)))
    F, _ = symplectic_density(V, W, j, 1.0, 1.0)
    gbar = stochastic_symplectic_density(V, W, j, NoiseSpec.constant(grid, gamma), 1.0)
    return float(np.max(np.abs(gbar - gamma * F)))


# registry -------------------------------------------------------------------

@dataclass
class Property:
    name: str
    tags: tuple
    tol: float
    measure: Callable[[], float]
    kind: str = "max"

    def passes(self, value: float, tol: float) -> bool:
        if not np.isfinite(value):
            return False
        return value <= tol if self.kind == "max" else value >= tol


def _min_order(errors) -> float:
    return min(orders_from(errors))


PROPERTIES = [
    Property("duality", ("algebra", "duality"), 1e-10, lambda: duality_defect(trials=50)),
    Property("jacobi", ("algebra", "jacobi"), 1e-9, lambda: jacobi_defect(trials=50)),
    Property("thm2", ("thm2", "clebsch"), 1e-8, lambda: thm2_defect(trials=20)),
    Property("thm3-bridges", ("thm3", "msi"), 1e-9, lambda: thm3_defect(FamilyParams(1.0, 1.0, 1.0))),
    Property("thm3-reduced", ("thm3", "msi"), 1e-9, lambda: thm3_defect(FamilyParams(1.0, 1.0, 0.0))),
    Property("thm3-burgers", ("thm3", "msi"), 1e-9, lambda: thm3_defect(FamilyParams(1.0, 0.0, 0.0))),
    Property("flux-antisymmetry", ("msi",), 1e-15, flux_antisymmetry_defect),
    Property("soliton-residual", ("solver", "soliton"), 1e-8, soliton_residual),
    Property("mass-drift", ("solver", "conservation"), 1e-11,
             lambda: conservation_drifts(FamilyParams(1.0, 1.0, 1.0), t_end=0.5)["mass"]),
    Property("energy-drift", ("solver", "conservation"), 1e-8,
             lambda: conservation_drifts(FamilyParams(1.0, 1.0, 0.0), t_end=0.5)["energy"]),
    Property("symplecticity-order", ("symplectic", "msi"), 1.8, lambda: _min_order(symplecticity_errors()), "min"),
    Property("box-order", ("box", "msi"), 1.8,
             lambda: box_soliton_study(levels=3)[-1].order, "min"),
    Property("cocycle-identity", ("cocycle", "group"), 1e-8, cocycle_identity_defect),
    Property("cocycle-unit", ("cocycle", "group"), 1e-10, cocycle_unit_defect),
    Property("group-associativity", ("group",), 1e-8, associativity_defect),
    Property("mutual-inverse", ("reconstruction",), 1e-6, lambda: soliton_mutual_inverse(t_end=0.5)),
    Property("cocycle-rate-order", ("reconstruction", "cocycle"), 1.8,
             lambda: _min_order(cocycle_rate_gaps(spacings=(0.04, 0.02, 0.01))), "min"),
    Property("sde-formulations", ("stochastic",), 1e-11, sde_formulation_defect),
    Property("gbar-constant-noise", ("stochastic",), 1e-12, gbar_constant_defect),
]


def select(filter_tag: str | None = None) -> list[Property]:
    if not filter_tag:
        return list(PROPERTIES)
    return [p for p in PROPERTIES if filter_tag in p.tags or p.name == filter_tag or p.name.startswith(filter_tag)]


@dataclass
class Report:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r["passed"] for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r["passed"]]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "count": len(self.results), "properties": self.results}


def run_suite(filter_tag: str | None = None, tolerance: float | None = None, log=None) -> Report:
    """Run the selected properties; ``tolerance`` overrides every ``max``-kind tolerance."""
    props = select(filter_tag)
    if not props:
        raise ValueError(f"no property matches filter {filter_tag!r}")
    report = Report()
    for prop in props:
        tol = tolerance if (tolerance is not None and prop.kind == "max") else prop.tol
        t0 = time.perf_counter()
        try:
            value = float(prop.measure())
            error = None
        except Exception as exc:  # a crashing property is a failing property
            value, error = float("nan"), f"{type(exc).__name__}: {exc}"
        entry = {"name": prop.name, "tags": list(prop.tags), "kind": prop.kind, "tolerance": tol,
                 "value": value, "passed": prop.passes(value, tol),
                 "seconds": round(time.perf_counter() - t0, 3)}
        if error:
            entry["error"] = error
        report.results.append(entry)
        if log is not None:
            log(entry)
    return report
