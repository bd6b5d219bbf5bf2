"""Command-line front end.

Exit codes: 0 ok, 1 verification failure, 2 configuration error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io
from .box import NewtonError, NewtonOpts, box_simulate
from .config import ConfigError, RunConfig, initial_velocity, load_config, noise_profile
from .convergence import box_soliton_study, rk4_temporal_study, rows_to_columns
from .diffeo import CircleDiffeo, MonotonicityError
from .grid import Field
from .msi import COMPONENTS, U
from .reconstruction import (VelocityHistory, advect_inverse_map, forward_map_from_velocity,
                             mutual_inverse_error, theta_reconstruct)
from .solver import SimulationAbort, energy, momentum_from_velocity, peak_location, rk4_simulate, soliton_speed
from .stochastic import simulate_sde
from .verify import run_suite

log = logging.getLogger("virbott")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def _build_stamp() -> dict:
    return {"package": "virbott", "version": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _prepare(args) -> tuple[RunConfig, Path]:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output"] = str(args.out)
    if updates:
        cfg = cfg.model_copy(update=updates)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _manifest(out: Path, cfg: RunConfig, command: str, outputs: list, summary: dict):
    io.write_json(out / "run.json", {"config": cfg.resolved(), "build": _build_stamp(), "command": command,
                                     "outputs": sorted(outputs), "summary": summary})


def _write_snapshots(out: Path, x: np.ndarray, snaps: list[dict]) -> list:
    names = []
    for k, cols in enumerate(snaps):
        name = f"snap_{k}.csv"
        io.write_csv(out / name, {"x": x, **cols})
        names.append(name)
    return names


def _soliton_summary(cfg: RunConfig, grid, times, u) -> dict:
    if cfg.initial.kind != "soliton" or times[-1] <= 0:
        return {}
    start = peak_location(Field(grid, u[0]))
    end = peak_location(Field(grid, u[-1]))
    shift = (end - start) % grid.length
    return {"peak_shift": shift, "peak_speed": shift / times[-1],
            "expected_speed": soliton_speed(cfg.initial.k, cfg.params.a)}


def cmd_simulate(args) -> int:
    cfg, out = _prepare(args)
    p = cfg.params.family()
    grid = cfg.grid.build()
    u0 = initial_velocity(cfg, grid)
    if cfg.scheme == "reference":
        traj = rk4_simulate(momentum_from_velocity(u0, p), p, cfg.time.dt, cfg.time.t_end, cfg.mean_u,
                            cfg.time.snapshot_every)
        snaps = [{"u": traj.u[k], "m": traj.m[k]} for k in range(len(traj.times))]
        diag = traj.diagnostics
        columns = diag.columns()
        summary = {"steps": len(diag.times) - 1, "mass_drift": diag.absolute_drift("mass"),
                   "energy_drift": diag.relative_drift("energy"),
                   **_soliton_summary(cfg, grid, traj.times, traj.u)}
        times, us = traj.times, traj.u
    else:
        newton = NewtonOpts(cfg.newton.tol, cfg.newton.max_iter)
        times, states, stepper = box_simulate(u0, p, cfg.time.dt, cfg.time.t_end, newton, cfg.time.snapshot_every)
        snaps = [dict(zip(COMPONENTS, s.lifted())) for s in states]
        us = np.array([s.z[U] for s in states])
        iters = [0] + stepper.stats.iterations
        columns = {"t": times, "energy": [energy(grid, uk, p) for uk in us],
                   "mass": [p.alpha * grid.integrate(uk) for uk in us]}
        summary = {"steps": len(stepper.stats.iterations), "max_newton_iterations": max(iters),
                   **_soliton_summary(cfg, grid, times, us)}
    outputs = _write_snapshots(out, grid.x, snaps)
    io.write_csv(out / "diag.csv", columns)
    _manifest(out, cfg, "simulate", outputs + ["diag.csv", "run.json"], summary)
    log.info("simulate: %d snapshots written to %s", len(times), out)
    return EXIT_OK


def cmd_simulate_sde(args) -> int:
    cfg, out = _prepare(args)
    p = cfg.params.family()
    grid = cfg.grid.build()
    noise = noise_profile(cfg, grid)
    m0 = momentum_from_velocity(initial_velocity(cfg, grid), p)
    run = simulate_sde(m0, p, noise, cfg.time.dt, cfg.time.t_end, seed=cfg.seed, mean_u=cfg.mean_u,
                       snapshot_every=cfg.time.snapshot_every, scheme=cfg.sde_scheme, tail_limit=0.05)
    traj = run.trajectory
    snaps = [{"u": traj.u[k], "m": traj.m[k]} for k in range(len(traj.times))]
    outputs = _write_snapshots(out, grid.x, snaps)
    io.write_csv(out / "diag.csv", traj.diagnostics.columns())
    io.write_csv(out / "path.csv", {"t": run.path.times, "W": run.path.W})
    summary = {"seed": cfg.seed, "steps": len(traj.diagnostics.times) - 1, "eta": cfg.eta,
               "eta_note": "central-slot noise does not affect the dynamics" if cfg.eta is not None else None}
    _manifest(out, cfg, "simulate-sde", outputs + ["diag.csv", "path.csv", "run.json"], summary)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg, out = _prepare(args)
    p = cfg.params.family()
    grid = cfg.grid.build()
    u0 = initial_velocity(cfg, grid)
    traj = rk4_simulate(momentum_from_velocity(u0, p), p, cfg.time.dt, cfg.time.t_end, cfg.mean_u,
                        cfg.time.snapshot_every)
    hist = VelocityHistory.from_trajectory(traj)
    times, psis = forward_map_from_velocity(hist)
    _, ls = advect_inverse_map(CircleDiffeo.identity(grid), hist)
    _, theta, r = theta_reconstruct(hist, (times, ls), p.a)
    mutual = [mutual_inverse_error(a, b) for a, b in zip(psis, ls)]
    io.write_csv(out / "diag.csv", {"t": times, "theta": theta, "r": r, "mutual_inverse": mutual})
    snaps = [{"u": traj.u[k], "l": ls[k].values, "psi": psis[k].values} for k in range(len(times))]
    outputs = _write_snapshots(out, grid.x, snaps)
    summary = {"max_mutual_inverse": max(mutual), "theta_final": float(theta[-1]),
               "min_l_x": float(min(l.slope().min() for l in ls))}
    _manifest(out, cfg, "reconstruct", outputs + ["diag.csv", "run.json"], summary)
    return EXIT_OK


def cmd_verify(args) -> int:
    def show(entry):
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{status} {entry['name']}: {entry['value']:.3e} ({entry['kind']} {entry['tolerance']:.1e})")

    report = run_suite(args.filter, args.tolerance, log=show)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "report.json", report.as_dict())
    for fail in report.failures():
        print(f"failed: {fail['name']} measured {fail['value']:.3e} against {fail['tolerance']:.1e}",
              file=sys.stderr)
    print(f"{len(report.results) - len(report.failures())}/{len(report.results)} properties passed")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_converge(args) -> int:
    cfg, out = _prepare(args)
    levels = args.levels if args.levels is not None else cfg.convergence.levels
    if levels < 3:
        raise ConfigError(f"a convergence study needs at least 3 levels, got {levels}")
    p = cfg.params.family()
    steps0 = max(1, int(round(cfg.time.t_end / cfg.time.dt)))
    if cfg.scheme == "box":
        if cfg.initial.kind != "soliton" or p.alpha != 1 or p.beta != 0:
            raise ConfigError("the box-scheme study runs on the KdV soliton (alpha = 1, beta = 0, soliton IC)")
        x0 = 0.5 * cfg.grid.L if cfg.initial.x0 is None else cfg.initial.x0
        rows = box_soliton_study(levels, cfg.grid.n, cfg.grid.L, cfg.initial.k, p.a, cfg.time.t_end, steps0, x0,
                                 NewtonOpts(cfg.newton.tol, cfg.newton.max_iter))
    else:
        grid = cfg.grid.build()
        rows = rk4_temporal_study(levels, cfg.grid.n, cfg.grid.L, p, initial_velocity(cfg, grid),
                                  cfg.time.dt, cfg.time.t_end)
    io.write_csv(out / "orders.csv", rows_to_columns(rows))
    for r in rows:
        print(f"level {r.level}: n={r.n} dt={r.dt:.3e} error={r.error:.3e} order={r.order:.3f}")
    _manifest(out, cfg, "converge", ["orders.csv", "run.json"],
              {"levels": levels, "orders": [r.order for r in rows[1:]]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="virbott", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"virbott {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", type=Path, help="JSON run configuration (or a previous run.json)")
            sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out", type=Path, help="output directory")
        return sp

    common(sub.add_parser("simulate", help="deterministic run")).set_defaults(func=cmd_simulate)
    common(sub.add_parser("simulate-sde", help="stochastic run")).set_defaults(func=cmd_simulate_sde)
    common(sub.add_parser("reconstruct", help="forward map, inverse map and theta")).set_defaults(func=cmd_reconstruct)
    v = common(sub.add_parser("verify", help="run the verification suite"), config=False)
    v.add_argument("--filter", help="run only properties carrying this tag or name prefix")
    v.add_argument("--tolerance", type=float, help="override every bound-type tolerance")
    v.set_defaults(func=cmd_verify)
    c = common(sub.add_parser("converge", help="refinement study"))
    c.add_argument("--levels", type=int, help="number of refinement levels (>= 3)")
    c.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationAbort, MonotonicityError, NewtonError, FloatingPointError) as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        if args.command == "verify":
            print(f"verification error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
