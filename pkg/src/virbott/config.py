"""Strict JSON run configuration."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PField, ValidationError, model_validator

from . import io
from .algebra import FamilyParams
from .grid import Field, PeriodicGrid
from .solver import kdv_soliton


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsConfig(_Strict):
    alpha: float = PField(1.0, ge=0)
    beta: float = PField(0.0, ge=0)
    a: float = PField(1.0, ge=0)

    @model_validator(mode="after")
    def _dynamic(self):
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("alpha = beta = 0 leaves the momentum-velocity relation degenerate")
        return self

    def family(self) -> FamilyParams:
        return FamilyParams(self.alpha, self.beta, self.a)


class GridConfig(_Strict):
    n: int = PField(256, ge=8)
    L: float = PField(2 * math.pi, gt=0)

    def build(self) -> PeriodicGrid:
        return PeriodicGrid(self.n, self.L)


class TimeConfig(_Strict):
    dt: float = PField(1e-3, gt=0)
    t_end: float = PField(1.0, ge=0)
    snapshot_every: int = PField(1, ge=1)


class SolitonIC(_Strict):
    kind: Literal["soliton"] = "soliton"
    k: float = PField(1.0, gt=0)
    x0: float | None = None


class FourierIC(_Strict):
    kind: Literal["fourier"] = "fourier"
    mean: float = 0.0
    # (mode, cosine coefficient, sine coefficient)
    modes: list[tuple[int, float, float]] = PField(default_factory=lambda: [(1, 0.0, 0.5)])


class FileIC(_Strict):
    kind: Literal["file"] = "file"
    path: str
    column: str = "u"


class ConstantNoise(_Strict):
    kind: Literal["constant"] = "constant"
    gamma: float = 0.5


class CosineNoise(_Strict):
    kind: Literal["cosine"] = "cosine"
    amplitude: float = 0.1
    mode: int = PField(1, ge=0)
    offset: float = 0.0


class FileNoise(_Strict):
    kind: Literal["file"] = "file"
    path: str
    column: str = "xi"


InitialConfig = Annotated[Union[SolitonIC, FourierIC, FileIC], PField(discriminator="kind")]
NoiseConfig = Annotated[Union[ConstantNoise, CosineNoise, FileNoise], PField(discriminator="kind")]


class NewtonConfig(_Strict):
    tol: float = PField(1e-11, gt=0)
    max_iter: int = PField(25, ge=1)


class ConvergenceConfig(_Strict):
    levels: int = PField(4, ge=1)


class RunConfig(_Strict):
    params: ParamsConfig = ParamsConfig()
    grid: GridConfig = GridConfig()
    time: TimeConfig = TimeConfig()
    scheme: Literal["reference", "box"] = "reference"
    initial: InitialConfig = SolitonIC()
    mean_u: float = 0.0
    noise: NoiseConfig | None = None
    eta: float | None = None
    seed: int = 0
    sde_scheme: Literal["heun", "midpoint"] = "heun"
    newton: NewtonConfig = NewtonConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()
    output: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        if self.scheme == "box" and self.grid.n % 2 == 0:
            raise ValueError("the box scheme needs an odd grid size n")
        if self.params.alpha != 0 and self.mean_u != 0:
            raise ValueError("mean_u is only meaningful when alpha = 0")
        if self.initial.kind == "soliton" and self.params.a == 0:
            raise ValueError("the soliton initial condition 4ak^2 sech^2(kx) needs a > 0")
        return self

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def parse_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    if "config" in doc and "build" in doc:
        doc = doc["config"]
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    if base_dir is not None:
        updates = {}
        for key in ("initial", "noise"):
            sub = getattr(cfg, key)
            if sub is not None and sub.kind == "file" and not Path(sub.path).is_absolute():
                updates[key] = sub.model_copy(update={"path": str((base_dir / sub.path).resolve())})
        if updates:
            cfg = cfg.model_copy(update=updates)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(doc, path.parent)


def _column_from_file(path: str, column: str, grid: PeriodicGrid) -> np.ndarray:
    try:
        cols = io.read_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if column not in cols:
        raise ConfigError(f"{path} has no column {column!r}")
    vals = cols[column]
    if vals.size != grid.n:
        raise ConfigError(f"{path} has {vals.size} samples, grid has {grid.n}")
    return vals


def initial_velocity(cfg: RunConfig, grid: PeriodicGrid | None = None) -> Field:
    grid = grid or cfg.grid.build()
    ic = cfg.initial
    if ic.kind == "soliton":
        x0 = 0.5 * grid.length if ic.x0 is None else ic.x0
        return Field(grid, kdv_soliton(ic.k, cfg.params.a, grid.x, 0.0, grid.length, x0))
    if ic.kind == "fourier":
        theta = grid.x * (2 * np.pi / grid.length)
        vals = np.full(grid.n, ic.mean)
        for k, c, s in ic.modes:
            vals += c * np.cos(k * theta) + s * np.sin(k * theta)
        return Field(grid, vals)
    return Field(grid, _column_from_file(ic.path, ic.column, grid))


def noise_profile(cfg: RunConfig, grid: PeriodicGrid | None = None):
    from .stochastic import NoiseSpec

    grid = grid or cfg.grid.build()
    nz = cfg.noise
    if nz is None:
        return NoiseSpec.zero(grid)
    if nz.kind == "constant":
        return NoiseSpec(Field.constant(grid, nz.gamma), nz.gamma, cfg.eta)
    if nz.kind == "cosine":
        theta = grid.x * (2 * np.pi / grid.length)
        return NoiseSpec(Field(grid, nz.offset + nz.amplitude * np.cos(nz.mode * theta)), None, cfg.eta)
    return NoiseSpec(Field(grid, _column_from_file(nz.path, nz.column, grid)), None, cfg.eta)
