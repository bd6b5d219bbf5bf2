import json
import subprocess
import sys

import numpy as np
import pytest

from virbott import io
from virbott.cli import main


def write_cfg(path, **doc):
    path.write_text(json.dumps(doc))
    return path


KDV = dict(params={"alpha": 1, "beta": 0, "a": 1}, grid={"n": 128, "L": 40},
           time={"dt": 1e-3, "t_end": 0.5, "snapshot_every": 250}, initial={"kind": "soliton", "k": 1.0})


@pytest.fixture(scope="module")
def kdv_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("kdv")
    cfg = write_cfg(d / "kdv.json", **KDV)
    assert main(["simulate", "--config", str(cfg), "--out", str(d / "out")]) == 0
    return d


def test_simulate_outputs(kdv_run):
    out = kdv_run / "out"
    manifest = io.read_json(out / "run.json")
    assert set(manifest["outputs"]) == {"snap_0.csv", "snap_1.csv", "snap_2.csv", "diag.csv", "run.json"}
    assert manifest["config"]["params"]["a"] == 1.0 and manifest["config"]["sde_scheme"] == "heun"
    assert manifest["build"]["package"] == "virbott"
    assert manifest["summary"]["peak_speed"] == pytest.approx(4.0, abs=1e-3)
    diag = io.read_csv(out / "diag.csv")
    assert diag["t"].size == 501


def test_manifest_refeed_reproduces_outputs(kdv_run, tmp_path):
    assert main(["simulate", "--config", str(kdv_run / "out" / "run.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "diag.csv").read_bytes() == (kdv_run / "out" / "diag.csv").read_bytes()
    assert (tmp_path / "snap_2.csv").read_bytes() == (kdv_run / "out" / "snap_2.csv").read_bytes()


def test_snapshot_roundtrip(kdv_run, tmp_path):
    snap = io.read_csv(kdv_run / "out" / "snap_0.csv")
    io.write_csv(tmp_path / "again.csv", snap)
    assert (tmp_path / "again.csv").read_bytes() == (kdv_run / "out" / "snap_0.csv").read_bytes()
    from virbott.config import initial_velocity, load_config
    u0 = initial_velocity(load_config(kdv_run / "kdv.json"))
    assert np.max(np.abs(snap["u"] - u0.values)) < 1e-14


@pytest.mark.parametrize("doc", [{"params": {"alpha": 0, "beta": 0}}, {"grid": {"n": 64}, "colour": "red"}])
def test_bad_config_exit_2(tmp_path, doc, capsys):
    cfg = write_cfg(tmp_path / "bad.json", **doc)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 2


def test_runtime_abort_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "blow.json", params={"alpha": 1, "beta": 0, "a": 1}, grid={"n": 128},
                    time={"dt": 0.5, "t_end": 50}, initial={"kind": "fourier", "modes": [[1, 0.0, 3.0]]})
    with np.errstate(all="ignore"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "aborted" in capsys.readouterr().err


SDE = dict(params={"alpha": 1, "beta": 1, "a": 0}, grid={"n": 32},
           time={"dt": 1e-3, "t_end": 0.05, "snapshot_every": 25},
           initial={"kind": "fourier", "modes": [[1, 0.0, 0.5]]},
           noise={"kind": "cosine", "amplitude": 0.2, "mode": 1}, seed=3)


def test_sde_determinism_and_seed_override(tmp_path):
    cfg = write_cfg(tmp_path / "sde.json", **SDE)
    for name in ("a", "b"):
        assert main(["simulate-sde", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    assert main(["simulate-sde", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "c")]) == 0
    a, b, c = ((tmp_path / n / "diag.csv").read_bytes() for n in "abc")
    assert a == b and a != c
    assert io.read_json(tmp_path / "c" / "run.json")["config"]["seed"] == 4
    path = io.read_csv(tmp_path / "a" / "path.csv")
    assert path["W"][0] == 0.0 and path["t"].size == 51
    assert "hbar" in io.read_csv(tmp_path / "a" / "diag.csv")


def test_eta_is_recorded(tmp_path):
    cfg = write_cfg(tmp_path / "sde.json", **SDE, eta=0.3)
    assert main(["simulate-sde", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 0
    summary = io.read_json(tmp_path / "e" / "run.json")["summary"]
    assert summary["eta"] == 0.3 and summary["eta_note"]


def test_reconstruct(tmp_path):
    cfg = write_cfg(tmp_path / "rec.json", params={"alpha": 1, "beta": 1, "a": 0}, grid={"n": 64},
                    time={"dt": 5e-3, "t_end": 0.2}, initial={"kind": "fourier", "modes": [[1, 0.0, 0.5]]})
    assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    diag = io.read_csv(tmp_path / "r" / "diag.csv")
    assert set(diag) == {"t", "theta", "r", "mutual_inverse"}
    assert np.max(diag["mutual_inverse"]) < 1e-6


def test_verify_filter_and_tolerance(tmp_path, capsys):
    assert main(["verify", "--filter", "thm2", "--out", str(tmp_path)]) == 0
    report = io.read_json(tmp_path / "report.json")
    assert report["properties"] and all("thm2" in r["name"] or "thm2" in r["tags"] for r in report["properties"])
    assert main(["verify", "--filter", "thm2", "--tolerance", "1e-16"]) == 1
    err = capsys.readouterr().err
    assert "failed: thm2" in err


def test_verify_unknown_filter(capsys):
    assert main(["verify", "--filter", "no-such-property"]) == 2


def test_verify_full_suite(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    assert len(io.read_json(tmp_path / "report.json")["properties"]) >= 12


def test_converge(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", params={"alpha": 1, "beta": 1, "a": 0}, grid={"n": 32},
                    time={"dt": 0.1, "t_end": 1.0}, initial={"kind": "fourier", "modes": [[1, 0.0, 0.5]]})
    assert main(["converge", "--config", str(cfg), "--levels", "3", "--out", str(tmp_path / "o")]) == 0
    orders = io.read_csv(tmp_path / "o" / "orders.csv")["order"]
    assert np.isnan(orders[0]) and np.all(orders[1:] > 3.5)
    assert main(["converge", "--config", str(cfg), "--levels", "2", "--out", str(tmp_path / "o")]) == 2


def test_box_converge(tmp_path):
    cfg = write_cfg(tmp_path / "box.json", params={"alpha": 1, "beta": 0, "a": 1}, grid={"n": 129, "L": 80},
                    time={"dt": 0.125, "t_end": 0.5}, scheme="box", initial={"kind": "soliton", "k": 0.5, "x0": 30})
    assert main(["converge", "--config", str(cfg), "--levels", "3", "--out", str(tmp_path / "o")]) == 0
    orders = io.read_csv(tmp_path / "o" / "orders.csv")["order"]
    assert np.all((orders[1:] >= 1.8) & (orders[1:] <= 2.2))


def test_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "virbott.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate-sde" in out.stdout
