import csv
import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from ficds import cli, config
from ficds.errors import RootFindingError

SVG = "{http://www.w3.org/2000/svg}"


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--out", str(out)])
    return code, out


def read_json(path):
    return json.loads(path.read_text())


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------ analyze


def test_analyze_a1_stable(tmp_path, capsys):
    code, out = run(["analyze", "table1_a1"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert rep["verdict"] == "stable" and rep["system_id"] == "A1"
    assert rep["robustness"]["flagged"] is False
    assert "stable" in capsys.readouterr().out
    poles = rows(out / "poles.csv")
    assert {r["index_id"] for r in poles} == set(rep["indices"])
    for idx, summary in rep["indices"].items():
        assert sum(r["index_id"] == idx for r in poles) == summary["n_poles"]
    assert (out / "pzmap.svg").exists()


def test_analyze_override_unstable(tmp_path):
    code, out = run(["analyze", "table1_a1", "--set", "inverter[0].kp=7.5"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert rep["verdict"] == "unstable"
    assert rep["overrides"] == {"inverter[0].kp": 7.5}


def test_analyze_pade_order_flag(tmp_path):
    code, out = run(["analyze", "table1_b1", "--pade-order", "7"], tmp_path)
    assert code == 0
    assert read_json(out / "report.json")["pade_order"] == 7


def test_analyze_accepts_file_path(tmp_path):
    code, _ = run(["analyze", str(config.shipped_config_path("table1_a2"))], tmp_path)
    assert code == 0


def test_missing_field_exit_2(tmp_path, capsys):
    doc = json.loads(config.shipped_config_path("table1_a1").read_text())
    del doc["load"]["R_ohm"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    code, _ = run(["analyze", str(p)], tmp_path)
    assert code == 2
    assert "load.R_ohm" in capsys.readouterr().err


def test_unknown_key_exit_2(tmp_path, capsys):
    doc = json.loads(config.shipped_config_path("table1_a1").read_text())
    doc["grid"]["Xs_ohm"] = 1.0
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert run(["analyze", str(p)], tmp_path)[0] == 2
    assert "grid" in capsys.readouterr().err


def test_physical_invariant_exit_2(tmp_path):
    assert run(["analyze", "table1_a1", "--set", "grid.Ls=-1e-3"], tmp_path)[0] == 2


def test_bad_override_syntax_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["analyze", "table1_a1", "--set", "kp"], tmp_path)
    assert exc.value.code == 2


def test_unreadable_config_exit_4(tmp_path):
    assert run(["analyze", str(tmp_path / "nope.json")], tmp_path)[0] == 4


def test_root_finding_failure_exit_3(tmp_path, monkeypatch, capsys):
    def fail(*a, **k):
        raise RootFindingError("no convergence")

    monkeypatch.setattr("ficds.topology.poly_roots", fail)
    assert run(["analyze", "table1_a1"], tmp_path)[0] == 3
    assert "no convergence" in capsys.readouterr().err


def test_unwritable_out_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["analyze", "table1_a1", "--out", str(blocker / "sub")]) == 4


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ficds", "analyze", "table1_a1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0
    assert "stable" in r.stdout


# ------------------------------------------------------------------ sweep and boundary


def test_sweep_range_bracket(tmp_path):
    code, out = run(["sweep", "table1_a1", "--param", "inverter[0].kp", "--range", "6:8:5"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert rep["boundary_bracket"] == [7.0, 7.5]
    r = rows(out / "sweep.csv")
    assert [x["value"] for x in r] == ["6.0", "6.5", "7.0", "7.5", "8.0"]
    assert list(r[0]) == ["param", "value", "max_real", "verdict", "error"]
    assert (out / "sweep.svg").exists()


def test_sweep_values_ls(tmp_path):
    code, out = run(["sweep", "table1_a1", "--param", "grid.Ls", "--values", "0.0003,0.0005"], tmp_path)
    assert code == 0
    assert [x["verdict"] for x in rows(out / "sweep.csv")] == ["stable", "unstable"]


@pytest.mark.parametrize("kp", ["7.0", "7.5"])
def test_single_value_sweep_matches_analyze(tmp_path, kp):
    _, a = run(["analyze", "table1_a1", "--set", f"inverter[0].kp={kp}"], tmp_path, "a")
    _, s = run(["sweep", "table1_a1", "--param", "inverter[0].kp", "--values", kp], tmp_path, "s")
    ra, rs = read_json(a / "report.json"), read_json(s / "report.json")
    assert rs["rows"][0]["verdict"] == ra["verdict"]
    assert rs["rows"][0]["max_real"] == ra["max_real"]


def test_sweep_bad_path_exit_2(tmp_path):
    assert run(["sweep", "table1_a1", "--param", "inverter[0].kq", "--values", "1"], tmp_path)[0] == 2


def test_boundary(tmp_path):
    code, out = run(["boundary", "table1_b1", "--param", "inverter[0].kp", "--lo", "6", "--hi", "6.5"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert 6.0 < rep["value"] < 6.5
    assert rep["bracket_verdicts"] == ["stable", "unstable"]


def test_boundary_no_sign_change_exit_2(tmp_path):
    assert run(["boundary", "table1_a1", "--param", "inverter[0].kp", "--lo", "5", "--hi", "6"], tmp_path)[0] == 2


# ------------------------------------------------------------------ simulate


def test_simulate_a1(tmp_path):
    code, out = run(["simulate", "table1_a1", "--set", "simulation.duration_s=1.0"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert [s["verdict"] for s in rep["segments"]] == ["stable"]
    assert rep["segments"][0]["pole_verdict"] == "stable"
    r = rows(out / "trace.csv")
    assert list(r[0]) == ["t", "V_pcc", "I_g1"]
    assert len(r) == 10000
    assert (out / "trace.svg").exists()


def test_simulate_scenario_b(tmp_path):
    code, out = run(["simulate", "scenario_b"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    seq = ["stable", "unstable", "stable", "unstable"]
    assert [s["verdict"] for s in rep["segments"]] == seq
    assert [s["pole_verdict"] for s in rep["segments"]] == seq
    assert [s["start"] for s in rep["segments"]] == [0.0, 3.0, 3.3, 3.4]


def test_simulate_zero_duration_exit_2(tmp_path, capsys):
    assert run(["simulate", "table1_a1", "--set", "simulation.duration_s=0"], tmp_path)[0] == 2
    assert "error" in capsys.readouterr().err


def test_simulate_divergence_is_not_an_error(tmp_path):
    code, out = run(["simulate", "table1_a1", "--set", "inverter[0].kp=7.5", "--set", "simulation.blowup_factor=10"], tmp_path)
    assert code == 0
    rep = read_json(out / "report.json")
    assert rep["diverged"] is True
    assert rep["segments"][-1]["verdict"] == "unstable"


# ------------------------------------------------------------------ pzmap


def _marks(svg_path):
    root = ET.parse(svg_path).getroot()
    found = {}
    for g in root.iter(f"{SVG}g"):
        gid = g.get("id", "")
        if gid.startswith(("poles-", "zeros")):
            found[gid] = len(list(g.iter(f"{SVG}use"))) or len(list(g.iter(f"{SVG}path")))
    return found


def test_pzmap_stable_all_left(tmp_path):
    target = tmp_path / "a1.svg"
    assert cli.main(["pzmap", "table1_a1", "--out", str(target)]) == 0
    marks = _marks(target)
    assert marks.get("poles-stable", 0) > 0
    assert "poles-unstable" not in marks
    assert "xlink:href=\"http" not in target.read_text()


def test_pzmap_unstable_marked(tmp_path):
    target = tmp_path / "a1u.svg"
    assert cli.main(["pzmap", "table1_a1", "--set", "inverter[0].kp=7.5", "--out", str(target)]) == 0
    assert _marks(target).get("poles-unstable", 0) >= 1


def test_pzmap_empty_pole_set(tmp_path):
    target = tmp_path / "stiff.svg"
    assert cli.main(["pzmap", "table1_a1", "--set", "grid.Ls=0", "--set", "grid.Rs=0", "--out", str(target)]) == 0
    assert _marks(target) == {}
    ET.parse(target)


def test_pzmap_directory_target(tmp_path):
    assert cli.main(["pzmap", "table1_b2", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "pzmap.svg").exists()


def test_pzmap_creates_parent_dirs(tmp_path):
    target = tmp_path / "new" / "deeper" / "map.svg"
    assert cli.main(["pzmap", "table1_a2", "--set", "grid.Ls=5e-3", "--out", str(target)]) == 0
    assert _marks(target).get("poles-stable", 0) > 0


def test_pzmap_unknown_index_exit_2(tmp_path):
    assert cli.main(["pzmap", "table1_a1", "--index", "CDS_99", "--out", str(tmp_path)]) == 2


def test_pzmap_unwritable_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["pzmap", "table1_a1", "--out", str(blocker / "x.svg")]) == 4


# ------------------------------------------------------------------ determinism and round trip


def test_outputs_byte_identical(tmp_path):
    for name in ("r1", "r2"):
        cli.main(["analyze", "table1_b1", "--out", str(tmp_path / name)])
        cli.main(["sweep", "table1_b1", "--param", "inverter[0].kp", "--range", "5:7:3", "--out", str(tmp_path / name / "sw")])
        cli.main(["simulate", "table1_a2", "--set", "simulation.duration_s=0.2", "--out", str(tmp_path / name / "sim")])
    for rel in ("poles.csv", "pzmap.svg", "report.json", "sw/sweep.csv", "sw/sweep.svg", "sim/trace.csv", "sim/trace.svg"):
        assert (tmp_path / "r1" / rel).read_bytes() == (tmp_path / "r2" / rel).read_bytes(), rel


def test_csv_line_endings(tmp_path):
    _, out = run(["analyze", "table1_a1"], tmp_path)
    data = (out / "poles.csv").read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")


def test_json_round_trip_exact(tmp_path):
    _, out = run(["analyze", "table1_b1"], tmp_path)
    rep = read_json(out / "report.json")
    poles = rows(out / "poles.csv")
    # floats are written with repr, so they parse back to the same doubles
    from ficds.topology import analyze

    res = analyze(config.load("table1_b1").topology)
    assert rep["max_real"] == res.max_real
    written = sorted((float(r["re_rad_s"]), float(r["im_rad_s"])) for r in poles if r["index_id"] == res.primary)
    assert written == sorted((p.real, p.imag) for p in res.indices[res.primary].poles.roots)


# ------------------------------------------------------------------ golden shipped configs

INV1 = {"mode": "grid-following", "kp": 7.0, "ki": 1000.0, "omega1_hz": 50.0, "Ts_s": 1e-4,
        "filter": {"L1_H": 1.2e-3, "R1_ohm": 0.1, "C_F": 15e-6, "L2_H": 0.3e-3, "R2_ohm": 0.2}}
INV2 = {"mode": "grid-following", "kp": 5.0, "ki": 1000.0, "omega1_hz": 50.0, "Ts_s": 1e-4,
        "filter": {"L1_H": 1.5e-3, "R1_ohm": 0.1, "C_F": 15e-6, "L2_H": 0.5e-3, "R2_ohm": 0.2}}
INV3 = {"mode": "grid-forming", "kp": 0.1, "ki": 100.0, "kpc": 5.0, "omega1_hz": 50.0, "Ts_s": 1e-4,
        "filter": {"L_H": 1.5e-3, "RL_ohm": 0.1, "C_F": 28e-6}}
GRID = {"Rs_ohm": 0.4, "Ls_H": 0.3e-3, "Vgrid_rms": 230.0}

GOLDEN = {
    "table1_a1": (GRID, [INV1]),
    "table1_a2": (GRID, [INV3]),
    "table1_b1": (GRID, [INV1, INV2]),
    "table1_b2": (None, [INV1, INV3]),
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_shipped_configs_golden(name):
    doc = json.loads(config.shipped_config_path(name).read_text())
    grid, invs = GOLDEN[name]
    assert doc["grid"] == grid
    assert doc["load"] == {"R_ohm": 100.0}
    assert doc["inverters"] == invs
    assert doc["simulation"]["control_rate_hz"] == 10e3
    loaded = config.load(name)
    assert loaded.topology.system_id == name[-2:].upper()
    assert loaded.topology.inverters[0].omega1 == pytest.approx(2 * math.pi * 50)


def test_scenario_b_config():
    doc = json.loads(config.shipped_config_path("scenario_b").read_text())
    assert doc["inverters"] == [dict(INV1, kp=6.0), INV2]
    assert doc["grid"] == GRID
    ev = doc["simulation"]["events"]
    assert [(e["time_s"], e["action"]) for e in ev] == [(3.0, "set"), (3.3, "switch"), (3.3, "island"), (3.4, "set")]
    assert ev[1]["former"] == INV3
