import json
import subprocess
import sys

import numpy as np
import pytest

from bretp.cli import main
from bretp.inforate import region_label
from bretp.io import read_csv, read_events, write_csv, write_events, write_json
from bretp.mc import EventPath

RT = '{"type": "random_telegraph", "params": {"k1": 0.1, "k2": 0.1}}'
DARK = '{"type": "dark_current", "params": {"k1": 0.1, "k2": 0.1, "c": 1.0, "lambda0": 0.1}}'


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_csv_round_trip_is_exact(tmp_path):
    x = np.random.default_rng(0).standard_normal((50, 3)) * 10.0 ** np.arange(-8, 7, 5)
    write_csv(tmp_path / "a.csv", ["a", "b", "c"], x)
    header, cols = read_csv(tmp_path / "a.csv")
    assert header == ["a", "b", "c"]
    assert np.array_equal(np.column_stack([cols[h] for h in header]), x)
    # the write is atomic: no temporary files are left behind
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv"]


def test_json_handles_numpy_and_nonfinite(tmp_path):
    write_json(tmp_path / "a.json", {"v": np.float64(0.1), "n": np.int64(3), "arr": np.arange(2),
                                     "inf": float("inf"), "ok": np.bool_(True)})
    d = json.loads((tmp_path / "a.json").read_text())
    assert d == {"v": 0.1, "n": 3, "arr": [0, 1], "inf": "inf", "ok": True}


def test_events_round_trip(tmp_path):
    ev = EventPath(np.array([0.1, 0.7, 2.25]), 3.0, input_states=np.array([0, 1]),
                   input_switch_times=np.array([0.0, 0.5]))
    write_events(tmp_path / "ev.csv", ev)
    back = read_events(tmp_path / "ev.csv", horizon=3.0)
    assert np.array_equal(back.jump_times, ev.jump_times)
    assert (tmp_path / "ev_input.csv").exists()


def test_acid_command_outputs(tmp_path):
    out = tmp_path / "acid"
    assert main(["acid", "--model", DARK, "--cells", "100", "--bins", "200", "--out", str(out)]) == 0
    m = _manifest(out)
    assert set(m) == {"command", "model", "settings", "seed", "outputs", "diagnostics", "version"}
    assert m["command"] == "acid" and m["model"]["type"] == "dark_current"
    d = m["diagnostics"]
    assert d["column_sum_deviation"] < 1e-12
    assert d["p0_integral"] == pytest.approx(0.6, rel=1e-9)
    assert d["acid_mean"] == pytest.approx(0.6, abs=2e-3)
    _, cols = read_csv(out / "acid.csv")
    assert cols["weight"].sum() == pytest.approx(1.0, abs=1e-3)
    _, p0 = read_csv(out / "boundary_density.csv")
    assert p0["p0"].size == 100


def test_acid_command_without_boundary_state(tmp_path):
    out = tmp_path / "rt"
    assert main(["acid", "--model", RT, "--bins", "100", "--out", str(out)]) == 0
    header, cols = read_csv(out / "boundary_density.csv")
    assert header == ["p0"] and cols["p0"].size == 1


def test_model_file_and_missing_file(tmp_path, capsys):
    f = tmp_path / "m.json"
    f.write_text(RT)
    out = tmp_path / "mi"
    assert main(["mirate", "--model", str(f), "--out", str(out)]) == 0
    res = json.loads((out / "mirate.json").read_text())
    assert res["rate"] == pytest.approx(0.18367, abs=1e-5)
    capsys.readouterr()
    assert main(["mirate", "--model", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().out.strip())
    assert err["error"] == "FileNotFound"
    assert json.loads((out / "error.json").read_text()) == err


def test_invalid_parameters_exit_code(tmp_path, capsys):
    bad = '{"type": "random_telegraph", "params": {"k1": -1, "k2": 0.1}}'
    assert main(["mirate", "--model", bad, "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().out.strip())["error"] == "InvalidParameters"


def test_single_state_rate_is_zero(tmp_path):
    spec = '{"type": "ctmc", "params": {"states": ["a"], "generator": [[0]], "lambda_map": [1.5]}}'
    assert main(["mirate", "--model", spec, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "mirate.json").read_text())["rate"] == pytest.approx(0.0, abs=1e-12)


def test_mirate_sweep(tmp_path):
    assert main(["mirate", "--model", RT, "--sweep", "k1=0.1:0.3:3", "--out", str(tmp_path)]) == 0
    _, cols = read_csv(tmp_path / "mirate_sweep.csv")
    assert np.allclose(cols["k1"], [0.1, 0.2, 0.3])
    assert np.all(cols["rate"] > 0)


def test_phase_single_point_and_regions(tmp_path):
    one = tmp_path / "one"
    assert main(["phase", "--k1", "0.2:0.2:1", "--k2", "0.3:0.3:1", "--out", str(one)]) == 0
    _, cols = read_csv(one / "phase_plane.csv")
    assert cols["k1"].size == 1
    grid = tmp_path / "grid"
    assert main(["phase", "--k1", "0.05:1:10", "--k2", "0.05:1:10", "--nullcline", "0.2:0.4:5",
                 "--constraint", "1,0.2", "--out", str(grid)]) == 0
    _, cols = read_csv(grid / "phase_plane.csv")
    assert cols["k1"].size == 100
    for d1, d2, reg in zip(cols["d1"], cols["d2"], cols["region"]):
        assert reg == region_label(d1, d2)
    summary = json.loads((grid / "phase.json").read_text())
    assert summary["diagonal_crossing"] == pytest.approx(0.29, abs=0.02)
    assert summary["optimum"]["region"] == "C"


def test_validate_is_reproducible(tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        assert main(["validate", "--check", "acid-mc", "--model", DARK, "--cells", "80",
                     "--bins", "100", "--samples", "50000", "--seed", "4", "--out", str(out)]) == 0
        m = _manifest(out)
        m["diagnostics"].pop("wall_time")
        m["settings"].pop("out")
        m["outputs"] = [p.split("/")[-1] for p in m["outputs"]]
        runs.append((m, (out / "validate.json").read_bytes(), (out / "acid_vs_mc.csv").read_bytes()))
    assert runs[0] == runs[1]
    assert json.loads(runs[0][1])["w1"] < 0.02


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bretp", "mirate", "--model", RT, "--out",
                        str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0
    assert (tmp_path / "manifest.json").exists()
