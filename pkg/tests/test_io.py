import json

import numpy as np
import pandas as pd
import pytest

from divlab.core.exceptions import InputFormatError, InvalidDistributionError
from divlab.io.exporters import export_csv, read_csv
from divlab.io.loaders import load_joint, load_pmf


def test_load_pmf_from_file_and_text(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"masses": [0.25, 0.75]}), encoding="utf-8")
    assert load_pmf(path).masses == (0.25, 0.75)
    assert load_pmf('{"masses": [0.5, 0.5]}').masses == (0.5, 0.5)


@pytest.mark.parametrize("key", ["pmf", "P", " p "])
def test_load_pmf_key_aliases(key):
    assert load_pmf(json.dumps({key: [0.1, 0.9]})).n == 2


def test_bad_json_reports_line():
    with pytest.raises(InputFormatError) as exc:
        load_pmf('{\n  "masses": [0.5,\n  0.5\n')
    assert exc.value.line is not None
    assert str(exc.value).startswith("line ")


def test_non_list_payload_reports_key_line():
    with pytest.raises(InputFormatError) as exc:
        load_pmf('{\n  "note": "x",\n  "masses": "0.5 0.5"\n}')
    assert exc.value.line == 3


def test_masses_not_summing_to_one():
    with pytest.raises(InvalidDistributionError) as exc:
        load_pmf('{\n\n  "masses": [0.5, 0.6]\n}')
    assert str(exc.value).startswith("line 3:")


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(InputFormatError):
        load_pmf(tmp_path / "absent.json")


def test_load_joint():
    joint = load_joint('{"joint": [[0.25, 0.25], [0.5, 0.0]]}')
    assert (joint.M, joint.K) == (2, 2)
    with pytest.raises(InputFormatError):
        load_joint('{"matrix": [[0.5, 0.25], [0.25]]}')
    with pytest.raises(InputFormatError):
        load_joint('{"matrix": [0.5, 0.5]}')


def test_export_round_trip_and_determinism(tmp_path):
    df = pd.DataFrame({"x": np.linspace(0.0, 1.0, 5), "y": np.linspace(0.0, 1.0, 5) ** 2 / 3.0})
    a = tmp_path / "nested" / "a.csv"
    b = tmp_path / "b.csv"
    export_csv(df, a, provenance=["figure=demo", "base=e"])
    export_csv(df, b, provenance=["figure=demo", "base=e"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text(encoding="utf-8").startswith("# figure=demo\n# base=e\nx,y\n")
    back = read_csv(a)
    assert list(back.columns) == ["x", "y"]
    assert np.allclose(back["y"].to_numpy(), df["y"].to_numpy(), rtol=1e-14)
