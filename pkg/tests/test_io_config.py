import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from virbott import io
from virbott.config import ConfigError, RunConfig, initial_velocity, load_config, noise_profile, parse_config
from virbott.grid import Field, PeriodicGrid


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=40))
def test_csv_roundtrip_is_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "c.csv"
    io.write_csv(path, {"a": values, "b": values[::-1]})
    back = io.read_csv(path)
    assert np.array_equal(back["a"], np.array(values))
    assert np.array_equal(back["b"], np.array(values[::-1]))


def test_field_roundtrip(tmp_path, rng):
    g = PeriodicGrid(33, 7.5)
    f = Field(g, rng.normal(size=33) * 1e-7 + np.pi)
    io.write_field(tmp_path / "f.csv", f, "u")
    back = io.read_field(tmp_path / "f.csv")
    assert back.grid == g and np.array_equal(back.values, f.values)


def test_json_numpy_values(tmp_path):
    io.write_json(tmp_path / "a.json", {"x": np.arange(3), "y": np.float64(0.1), "z": tmp_path})
    back = io.read_json(tmp_path / "a.json")
    assert back["x"] == [0, 1, 2] and back["y"] == 0.1
    with pytest.raises(TypeError):
        io.write_json(tmp_path / "b.json", {"bad": object()})


def test_defaults_resolve():
    cfg = parse_config({})
    doc = cfg.resolved()
    assert doc["params"] == {"alpha": 1.0, "beta": 0.0, "a": 1.0}
    assert doc["scheme"] == "reference" and doc["seed"] == 0
    assert parse_config(doc) == cfg


@pytest.mark.parametrize("doc", [
    {"params": {"alpha": 0, "beta": 0}},
    {"params": {"alpha": -1}},
    {"grid": {"n": 4}},
    {"time": {"dt": 0}},
    {"unknown": 1},
    {"params": {"alpha": 1, "gamma": 2}},
    {"scheme": "box", "grid": {"n": 64}},
    {"mean_u": 0.5},
    {"params": {"a": 0}, "initial": {"kind": "soliton"}},
    {"initial": {"kind": "gaussian"}},
    [1, 2],
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_manifest_is_accepted_as_config():
    cfg = parse_config({"grid": {"n": 32}, "seed": 9})
    manifest = {"config": cfg.resolved(), "build": {"version": "x"}, "command": "simulate"}
    assert parse_config(manifest) == cfg


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_file_initial_condition_relative_to_config(tmp_path):
    g = PeriodicGrid(16)
    io.write_csv(tmp_path / "u0.csv", {"x": g.x, "u": np.sin(g.x)})
    (tmp_path / "cfg.json").write_text(json.dumps({"grid": {"n": 16}, "initial": {"kind": "file", "path": "u0.csv"}}))
    cfg = load_config(tmp_path / "cfg.json")
    assert np.array_equal(initial_velocity(cfg).values, np.sin(g.x))
    wrong = parse_config({"grid": {"n": 8}, "initial": {"kind": "file", "path": str(tmp_path / "u0.csv")}})
    with pytest.raises(ConfigError):
        initial_velocity(wrong)


def test_fourier_ic_and_noise_profiles():
    cfg = parse_config({"grid": {"n": 32}, "initial": {"kind": "fourier", "mean": 1.0, "modes": [[2, 0.5, 0.0]]},
                        "noise": {"kind": "cosine", "amplitude": 0.2, "mode": 1, "offset": 0.1}})
    g = cfg.grid.build()
    assert np.allclose(initial_velocity(cfg).values, 1 + 0.5 * np.cos(2 * g.x), atol=1e-15)
    assert np.allclose(noise_profile(cfg).xi.values, 0.1 + 0.2 * np.cos(g.x), atol=1e-15)
    const = parse_config({"grid": {"n": 32}, "noise": {"kind": "constant", "gamma": 0.5}})
    assert noise_profile(const).gamma == 0.5
    assert noise_profile(parse_config({"grid": {"n": 32}})).xi.max_abs() == 0.0


def test_soliton_ic_amplitude():
    cfg = RunConfig.model_validate({"grid": {"n": 256, "L": 40}, "initial": {"kind": "soliton", "k": 1.0}})
    assert np.max(initial_velocity(cfg).values) == pytest.approx(4.0, rel=1e-12)
