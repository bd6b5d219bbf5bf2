"""CSV and JSON output with bit-faithful float round trips."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def write_csv(path, columns: dict) -> Path:
    """Write equal-length columns with a header row; floats use 17 significant digits."""
    path = Path(path)
    names = list(columns)
    if not names:
        raise ValueError("no columns to write")
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header=",".join(names), comments="")
    return path


def read_csv(path) -> dict:
    path = Path(path)
    with path.open() as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(names)}


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_field(path, f, name: str = "value") -> Path:
    """One CSV row per node (x, value) plus a JSON header ``<path>.json`` with n and L."""
    path = Path(path)
    write_csv(path, {"x": f.grid.x, name: f.values})
    write_json(path.with_suffix(path.suffix + ".json"), {"n": f.grid.n, "L": f.grid.length, "column": name})
    return path


def read_field(path):
    from .grid import Field, PeriodicGrid

    path = Path(path)
    header = read_json(path.with_suffix(path.suffix + ".json"))
    cols = read_csv(path)
    return Field(PeriodicGrid(int(header["n"]), float(header["L"])), cols[header["column"]])
