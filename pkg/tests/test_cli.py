import csv
import hashlib
import json
import math
from pathlib import Path

import pytest

from twistguide.cli import OUT_ENV, main
from twistguide.errors import ConfigurationError
from twistguide.scenario import load_scenario, parse_scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SQUARE = {"name": "sq", "task": "ground_pair",
          "cross_section": {"shape": "rectangle", "width": 1.0, "height": 1.0}, "delta": 0.05}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_ground_pair_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(write_config(tmp_path, SQUARE)), "--out", str(out)]) == 0
    rows = read_csv(out / "ground_pair.csv")
    assert rows[0] == ["delta", "nodes", "E1", "E2", "gap"]
    assert math.isclose(float(rows[1][2]), 2 * math.pi ** 2, rel_tol=1e-2)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario_hash"] == load_scenario(tmp_path / "cfg.json").hash()
    for art in manifest["artifacts"]:
        assert hashlib.sha256((out / art["path"]).read_bytes()).hexdigest() == art["sha256"]
    assert "manifest:" in capsys.readouterr().out


def test_floats_round_trip(tmp_path):
    out = tmp_path / "out"
    main(["run", str(write_config(tmp_path, SQUARE)), "--out", str(out)])
    e1 = read_csv(out / "ground_pair.csv")[1][2]
    assert repr(float(e1)) == e1


def test_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, SQUARE)
    main(["run", str(cfg), "--out", str(tmp_path / "a"), "--seed", "4"])
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "4"])
    for name in ("ground_pair.csv", "ground_vector.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_thread_count_changes_results_below_tolerance(tmp_path):
    cfg = write_config(tmp_path, SQUARE)
    main(["run", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"])
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"])
    a = read_csv(tmp_path / "a" / "ground_pair.csv")[1]
    b = read_csv(tmp_path / "b" / "ground_pair.csv")[1]
    for x, y in zip(a[2:], b[2:]):
        assert math.isclose(float(x), float(y), rel_tol=1e-13)


def test_invalid_value_names_the_field(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(SQUARE, delta=-0.1))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "delta" in capsys.readouterr().err


def test_unknown_field_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(SQUARE, colour="red"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_malformed_json_reports_position():
    with pytest.raises(ConfigurationError, match=r"cfg:2:\d+"):
        parse_scenario('{"name": "x",\n "task": }', source="cfg")


def test_report_verifies_hashes(tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(write_config(tmp_path, SQUARE)), "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out / "manifest.json")]) == 0
    assert "verified" in capsys.readouterr().out
    (out / "ground_pair.csv").write_text("tampered\n")
    main(["report", str(out / "manifest.json")])
    assert "HASH MISMATCH ground_pair.csv" in capsys.readouterr().out


def test_environment_variable_sets_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    assert main(["run", str(write_config(tmp_path, SQUARE))]) == 0
    assert (tmp_path / "envout" / "sq" / "manifest.json").exists()


def test_export_mesh_has_only_vertices_and_faces(tmp_path):
    cfg = CONFIGS / "bent_injectivity.json"
    assert main(["export-mesh", str(cfg), "--out", str(tmp_path), "--n-boundary", "12"]) == 0
    lines = (tmp_path / "bent_injectivity.obj").read_text().splitlines()
    assert lines and {line.split()[0] for line in lines} == {"v", "f"}


def test_scenario_round_trip_and_hash_stability():
    for path in sorted(CONFIGS.glob("*.json")):
        sc = load_scenario(path)
        again = parse_scenario(sc.canonical_json())
        assert again == sc and again.hash() == sc.hash()


def test_hash_changes_with_content():
    a = parse_scenario(json.dumps(SQUARE))
    b = parse_scenario(json.dumps(dict(SQUARE, delta=0.04)))
    assert a.hash() != b.hash()


def test_injectivity_task_reports_status(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "bent_injectivity.json"), "--out", str(tmp_path)]) == 0
    assert "Injectivity criterion: PASS" in capsys.readouterr().out
