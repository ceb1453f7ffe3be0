import csv
import json
from pathlib import Path

import numpy as np
import pytest

from stlf.cli import main
from stlf.trace import Trace, write_trace

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def gap_trace(path, gaps):
    t = np.arange(len(gaps)) * 0.1
    write_trace(Trace.from_arrays(t, {"z_ego": np.zeros(len(gaps)), "z_agent": np.asarray(gaps, float)}), path)
    return path


# -- monitor ----------------------------------------------------------------------------


def test_monitor_exit_codes(tmp_path, capsys):
    f = "[](z_agent - z_ego > 0)"
    code, out, _ = run(capsys, "monitor", "--formula", f, "--trace", gap_trace(tmp_path / "ok.csv", [5, 4, 6]))
    assert code == 0
    rec = json.loads(out)
    assert rec["robustness"] == pytest.approx(4 / np.sqrt(2))
    code, out, _ = run(capsys, "monitor", "--formula", f, "--trace", gap_trace(tmp_path / "bad.csv", [5, -1, 6]))
    assert code == 1 and json.loads(out)["worst_time"] == pytest.approx(0.1)
    code, out, _ = run(capsys, "monitor", "--formula", f, "--trace", gap_trace(tmp_path / "zero.csv", [5, 0, 6]))
    assert code == 2 and json.loads(out)["inconclusive_flag"] is True


def test_monitor_formula_from_file(tmp_path, capsys):
    (tmp_path / "f.stl").write_text("<>_[0,0.2] (z_agent - z_ego < 0)")
    code, _, _ = run(capsys, "monitor", "--formula", f"@{tmp_path / 'f.stl'}", "--trace", gap_trace(tmp_path / "a.csv", [5, -1, 6]))
    assert code == 0


def test_monitor_malformed_csv_reports_row(tmp_path, capsys):
    p = gap_trace(tmp_path / "t.csv", [5, 4, 6])
    lines = p.read_text().splitlines()
    lines[2] = "0.1,abc"
    p.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "monitor", "--formula", "[](z_agent - z_ego > 0)", "--trace", p)
    assert code == 3
    assert "row" in err


def test_monitor_parse_error_and_usage(tmp_path, capsys):
    p = gap_trace(tmp_path / "t.csv", [5, 4, 6])
    code, _, err = run(capsys, "monitor", "--formula", "[](z_agent >", "--trace", p)
    assert code == 3 and "error" in err
    code, _, _ = run(capsys, "monitor", "--formula", "[](q > 0)", "--trace", p)
    assert code == 3
    assert main(["bogus"]) == 4
    capsys.readouterr()


# -- generate-ca -----------------------------------------------------------------------------


def test_generate_ca_small(tmp_path, capsys):
    code, out, _ = run(capsys, "generate-ca", "--config", CONFIGS / "ca_small.json", "--out", tmp_path / "ca.csv")
    rec = json.loads(out)
    assert code == 0
    assert (rec["covered"], rec["required"], rec["percent"]) == (12, 12, 100.0)
    with (tmp_path / "ca.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["a", "b", "c"] and 4 <= len(rows) - 1 <= 6


def test_generate_ca_exhaustive_strength(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"parameters": [{"name": "a", "levels": [0, 1, 2]}, {"name": "b", "levels": [0, 1]}], "strength": 2}))
    code, out, _ = run(capsys, "generate-ca", "--config", cfg, "--out", tmp_path / "ca.csv")
    assert code == 0 and json.loads(out)["rows"] == 6


def test_generate_ca_large_and_invalid(tmp_path, capsys):
    code, out, _ = run(capsys, "generate-ca", "--config", CONFIGS / "ca_16param.json", "--out", tmp_path / "ca.csv")
    rec = json.loads(out)
    assert code == 0 and rec["required"] == rec["covered"] == 2562 and rec["rows"] <= 94
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"parameters": [{"name": "a", "levels": [0, 1]}], "strength": 2}))
    code, _, _ = run(capsys, "generate-ca", "--config", bad, "--out", tmp_path / "x.csv")
    assert code == 3


# -- falsify ------------------------------------------------------------------------------------


def small_two_car(tmp_path, budget=6):
    cfg = json.loads((CONFIGS / "two_car_sa.json").read_text())
    cfg["method"]["budget"] = budget
    cfg["scenario"]["T"] = 3
    p = tmp_path / f"cfg_{budget}.json"
    p.write_text(json.dumps(cfg))
    return p


def test_falsify_writes_artifacts_and_is_reproducible(tmp_path, capsys):
    cfg = small_two_car(tmp_path)
    code, out, _ = run(capsys, "falsify", "--config", cfg, "--seed", 3, "--out", tmp_path / "a")
    assert code in (0, 1)
    assert json.loads(out)["evaluations"] <= 6
    for name in ("evaluations.jsonl", "summary.json", "best_trace.csv"):
        assert (tmp_path / "a" / name).exists()
    env = json.loads((tmp_path / "a" / "summary.json").read_text())["min_envelope"]
    assert all(b <= a for a, b in zip(env, env[1:]))
    run(capsys, "falsify", "--config", cfg, "--seed", 3, "--out", tmp_path / "b")
    for name in ("evaluations.jsonl", "summary.json", "best_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_falsify_config_errors(tmp_path, capsys):
    code, _, err = run(capsys, "falsify", "--config", small_two_car(tmp_path, 0), "--out", tmp_path / "o")
    assert code == 3 and "budget" in err
    code, _, err = run(capsys, "falsify", "--config", CONFIGS / "perception_ca_sa.json", "--out", tmp_path / "o")
    assert code == 3 and "covering-array" in err
    code, _, _ = run(capsys, "falsify", "--config", tmp_path / "missing.json", "--out", tmp_path / "o")
    assert code == 3


# -- heatmap / simulate -----------------------------------------------------------------------


def heat_cfg(tmp_path, grid, formula=None):
    cfg = json.loads(small_two_car(tmp_path).read_text())
    cfg["heatmap"]["grid"] = grid
    if formula:
        cfg["requirement"]["formula"] = formula
    p = tmp_path / "heat.json"
    p.write_text(json.dumps(cfg))
    return p


def test_heatmap_two_by_two(tmp_path, capsys):
    code, out, _ = run(capsys, "heatmap", "--config", heat_cfg(tmp_path, [2, 2]), "--out", tmp_path / "h.csv")
    assert code == 0 and json.loads(out)["cells"] == 4
    with (tmp_path / "h.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2 and all(len(r) == 2 for r in rows)
    meta = json.loads((tmp_path / "h.json").read_text())
    assert meta["x"]["name"] == "xi[0]" and len(meta["y"]["values"]) == 2


def test_heatmap_constant_requirement(tmp_path, capsys):
    cfg = heat_cfg(tmp_path, [3, 3], "[](z_ego - z_ego + 1 > 0)")
    run(capsys, "heatmap", "--config", cfg, "--out", tmp_path / "h.csv")
    with (tmp_path / "h.csv").open() as fh:
        vals = {v for r in csv.reader(fh) for v in r}
    assert len(vals) == 1


def test_simulate_dumps_trace(tmp_path, capsys):
    cfg = small_two_car(tmp_path)
    code, out, _ = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "t.csv", "--point", '{"xi[0]": -1, "xi[1]": -1, "mu": 2}')
    assert code == 0 and json.loads(out)["samples"] == 61
    code, _, _ = run(capsys, "monitor", "--formula", "[](z_agent - z_ego > 0)", "--trace", tmp_path / "t.csv")
    assert code == 0
