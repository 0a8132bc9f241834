import argparse
import json
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from divlab.cli import EXIT_INPUT, EXIT_OK, EXIT_WRITE, main, parse_grid
from divlab.core.exceptions import ParameterError
from divlab.core.models import RunConfig
from divlab.io.exporters import read_csv
from divlab.services.figures import figure_frame, table1

KL_HALF_QUARTER = 0.5 * math.log(4.0 / 3.0)


def _pmf_file(tmp_path, name, masses):
    path = tmp_path / name
    path.write_text(json.dumps({"masses": masses}), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------- figures

def test_table1_frame():
    df, summary = table1()
    assert list(df.columns) == ["L", "exact", "fano", "refined", "s2"]
    assert list(df["exact"]) == [0.5, 0.25, 0.125, 0.0625]
    assert abs(df["fano"].iloc[0] - 0.353) < 6e-4
    assert abs(df["refined"].iloc[3] - 0.016) < 6e-4
    assert summary["rows"] == 4


def test_figure1_bounds_hold_on_small_grid():
    df, summary = figure_frame(1, grid=(0.2, 0.6, 1.0))
    assert summary["self_check_violations"] == 0
    assert df["exact"].notna().any()


def test_figure5_simple_threshold_is_conservative():
    df, _ = figure_frame(5, grid=(0.001, 0.01, 0.1, 1.0))
    assert (df["simple_minus_1"] <= df["exact_minus_1"]).all()
    ratio = df["simple_minus_1"] / df["exact_minus_1"]
    assert ratio.is_monotonic_decreasing
    assert ratio.iloc[0] > 0.9


def test_figure8_contains_worked_example():
    df, summary = figure_frame(8)
    row = df.loc[np.isclose(df["d"], summary["example_d"], rtol=0.0, atol=1e-15)]
    assert len(row) == 1
    assert abs(row["p_min_exact"].iloc[0] - 0.0978) < 5e-4
    assert (df["p_min_simple"] >= df["p_min_exact"]).all()


@pytest.mark.parametrize("figure_id,grid", [(4, (0.5, 1.0, 2.0, 8.0)), (7, (0.1, 0.5, 0.9))])
def test_sweeps_do_not_depend_on_worker_count(figure_id, grid):
    one, _ = figure_frame(figure_id, grid=grid, workers=1)
    many, _ = figure_frame(figure_id, grid=grid, workers=4)
    pd.testing.assert_frame_equal(one, many)


def test_unknown_figure():
    with pytest.raises(ParameterError):
        figure_frame(9)


def test_parse_grid():
    assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
    assert parse_grid("2:2:1") == (2.0,)
    for bad in ("0:1", "a:b:c", "1:0:4", "0:1:0"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(bad)


# ---------------------------------------------------------------- cli

def test_eval_prints_value(tmp_path, capsys):
    p = _pmf_file(tmp_path, "p.json", [0.5, 0.5])
    q = _pmf_file(tmp_path, "q.json", [0.25, 0.75])
    assert main(["eval", "kl", p, q]) == EXIT_OK
    assert abs(float(capsys.readouterr().out) - KL_HALF_QUARTER) < 1e-11
    assert main(["eval", "kl", p, q, "--base", "2"]) == EXIT_OK
    assert abs(float(capsys.readouterr().out) - KL_HALF_QUARTER / math.log(2.0)) < 1e-11


def test_eval_reports_infinity(tmp_path, capsys):
    p = _pmf_file(tmp_path, "p.json", [0.5, 0.5])
    q = _pmf_file(tmp_path, "q.json", [1.0, 0.0])
    assert main(["eval", "kl", p, q]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "inf"


def test_invalid_input_exits_with_two(tmp_path, capsys):
    p = _pmf_file(tmp_path, "p.json", [0.5, 0.6])
    q = _pmf_file(tmp_path, "q.json", [0.5, 0.5])
    assert main(["eval", "kl", p, q]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err
    assert main(["eval", "renyi", q, q]) == EXIT_INPUT


def test_unwritable_output_exits_with_one(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert main(["table1", "--out", str(blocker / "t.csv")]) == EXIT_WRITE


def test_table1_to_file(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table1", "--out", str(out)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").startswith("# ")
    df = read_csv(out)
    assert list(df["L"]) == [1, 2, 3, 4]


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DIVLAB_OUT_DIR", str(tmp_path / "runs"))
    assert main(["figure", "6", "--grid", "2:5:4"]) == EXIT_OK
    df = read_csv(tmp_path / "runs" / "figure6.csv")
    assert list(df["rho"]) == [2.0, 3.0, 4.0, 5.0]


def test_stdout_carries_provenance(capsys, monkeypatch):
    monkeypatch.delenv("DIVLAB_OUT_DIR", raising=False)
    assert main(["example2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# ")
    assert "e_gamma_bound_1.25" in out


def test_listdecode_and_tree(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("DIVLAB_OUT_DIR", raising=False)
    joint = tmp_path / "joint.json"
    joint.write_text(json.dumps({"matrix": [[0.25, 0.05], [0.15, 0.15], [0.1, 0.3]]}), encoding="utf-8")
    assert main(["listdecode", "--joint", str(joint), "--list-size", "1", "--alpha", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "fano_renyi_2" in out and "s_norm_2" in out
    source = _pmf_file(tmp_path, "s.json", [0.7, 0.3])
    tree_csv = tmp_path / "tree.csv"
    assert main(["tree", "--source", source, "--leaves", "3", "--out", str(tree_csv)]) == EXIT_OK
    df = read_csv(tree_csv)
    assert list(df["depth"]) == [2, 2, 1]
    assert main(["tree", "--source", source, "--leaves", "4", "--random", "--seed", "7",
                 "--out", str(tmp_path / "rand.csv")]) == EXIT_OK


def test_audit_record(tmp_path):
    p = _pmf_file(tmp_path, "p.json", [0.5, 0.5])
    q = _pmf_file(tmp_path, "q.json", [0.25, 0.75])
    audit = tmp_path / "audit" / "eval.json"
    assert main(["eval", "kl", p, q, "--audit", str(audit)]) == EXIT_OK
    doc = json.loads(audit.read_text(encoding="utf-8"))
    assert {"timestamp", "app_version", "run_summary", "file_integrity", "inputs", "results"} <= set(doc)
    assert doc["inputs"]["command"] == "eval"
    assert doc["run_summary"]["rows"] is None
    assert abs(doc["run_summary"]["value"] - KL_HALF_QUARTER) < 1e-15
    assert all(stamp["exists"] for stamp in doc["file_integrity"]["inputs"])


@pytest.mark.parametrize("argv", [
    ["figure", "1", "--grid", "0.2:1:3"],
    ["figure", "4", "--grid", "0.5:8:4"],
    ["table1"],
])
def test_csv_bytes_do_not_depend_on_workers_or_reruns(tmp_path, argv):
    paths = [tmp_path / "one.csv", tmp_path / "four.csv", tmp_path / "four_again.csv"]
    for path, workers in zip(paths, ("1", "4", "4")):
        assert main(argv + ["--out", str(path), "--workers", workers]) == EXIT_OK
    one, four, again = (p.read_bytes() for p in paths)
    assert one == four
    assert four == again


def test_one_leaf_compression_rate_exits_with_two(tmp_path):
    source = _pmf_file(tmp_path, "s.json", [0.7, 0.3])
    out = tmp_path / "tree.csv"
    assert main(["tree", "--source", source, "--leaves", "1", "--code-alphabet", "2", "--out", str(out)]) == EXIT_INPUT
    assert not out.exists()


def test_run_config_is_frozen():
    cfg = RunConfig(command="table1", workers=2)
    with pytest.raises(ValidationError):
        cfg.workers = 4
    assert cfg.workers == 2
