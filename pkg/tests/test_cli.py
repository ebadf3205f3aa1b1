from __future__ import annotations

import csv
import json
import math


from discrete_rellich.cli import main


def _run(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, "--out", str(out)])
    return code, out


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_counterexample_report(tmp_path):
    code, out = _run(tmp_path, "counterexample")
    assert code == 0
    rep = _report(out)["result"]
    assert rep["interior_residual"] == "0" and rep["boundary_max"] == "1" and rep["cone_condition"] is False


def test_fermi_csv_has_singular_points(tmp_path):
    code, out = _run(tmp_path, "fermi", "--d", "2", "--lambda", "1")
    assert code == 0
    rows = list(csv.reader(open(out / "fermi.csv")))
    sing = [(float(r[0]), float(r[1])) for r in rows[1:] if r[-1] == "1"]
    assert sing == [(0.0, math.pi), (math.pi, 0.0)]


def test_norms_slope(tmp_path):
    code, out = _run(tmp_path, "norms", "--family", "power", "--exponent", "-1.5")
    assert code == 0
    rep = _report(out)["result"]
    assert rep["verdict"] == "satisfied" and abs(rep["slope"] + 1) <= 0.15


def test_cone_and_ucp(tmp_path):
    assert _run(tmp_path, "cone")[0] == 0
    code, out = _run(tmp_path, "ucp", "--trials", "5")
    assert code == 0 and _report(out)["result"]["all_trivial"]


def test_spectrum_small(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"version": 1, "seed": 3, "params": {"probe_boxes": [8, 16], "scan_boxes": [12, 20]}}))
    code, out = _run(tmp_path, "spectrum", "--config", str(cfg))
    rep = _report(out)
    assert rep["seed"] == 3
    assert code == (0 if rep["result"]["decaying_localization"] else 2)
    assert (out / "embedded_scan.csv").exists() and (out / "spectrum_bins.csv").exists()


def test_determinism(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["rellich", "--trials", "2", "--seed", "11", "--out", str(out)]) == 0
    for name in ("report.json", "rellich.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_changes_output(tmp_path):
    main(["ucp", "--trials", "2", "--seed", "1", "--out", str(tmp_path / "a")])
    main(["ucp", "--trials", "2", "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "ucp.csv").read_bytes() != (tmp_path / "b" / "ucp.csv").read_bytes()


def test_unknown_config_field_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"version": 1, "params": {"colour": "red"}}))
    assert main(["fermi", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "params.colour" in capsys.readouterr().err
    cfg.write_text(json.dumps({"version": 1, "extra": 0}))
    assert main(["fermi", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    cfg.write_text(json.dumps({"params": {}}))
    assert main(["fermi", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_usage_errors(tmp_path, capsys):
    assert main(["fermi", "--lambda", "3", "--out", str(tmp_path)]) == 1
    assert "lambda" in capsys.readouterr().err
    assert main(["nosuch"]) == 1
    assert main(["acceptance", "--criterion", "99", "--out", str(tmp_path)]) == 1
    assert main(["fermi", "--threads", "0", "--out", str(tmp_path)]) == 1


def test_assertion_failure_exit_code(tmp_path):
    # shrinking boxes make the localization grow, so the scan verdict fails
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"version": 1, "params": {"potential": "zero", "scan_boxes": [30, 10], "probe_boxes": [8]}}))
    code, out = _run(tmp_path, "spectrum", "--config", str(cfg))
    assert code == 2
    assert _report(out)["passed"] is False


def test_acceptance_single_criterion(tmp_path):
    code, out = _run(tmp_path, "acceptance", "--criterion", "5", "--threads", "1")
    assert code == 0
    assert _report(out)["result"]["5"]["checks"] == {k: True for k in ("rectangle", "rhombus", "zigzag", "staircase")}
    assert json.loads((out / "timings.json").read_text())["5"]["within_budget"]
