import os, json, pytest
try:
    from jsonschema import Draft7Validator, validate
except Exception:  # pragma: no cover
    pytest.skip("jsonschema not installed; run `pip install jsonschema` to enable", allow_module_level=True)

import numpy as np

from divlab.cli import EXIT_OK, main
from divlab.services.audit import write_audit

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "..", "data", "schema", "audit_schema.json")


def _schema():
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def test_audit_schema_is_valid():
    Draft7Validator.check_schema(_schema())


def test_cli_audit_matches_schema(tmp_path):
    audit = tmp_path / "table1.json"
    assert main(["table1", "--out", str(tmp_path / "t1.csv"), "--audit", str(audit)]) == EXIT_OK
    with open(audit, "r", encoding="utf-8") as f:
        doc = json.load(f)
    validate(doc, _schema())
    assert doc["run_summary"]["rows"] == 4
    assert doc["file_integrity"]["output"]["exists"]


def test_write_audit_handles_numpy_and_missing_files(tmp_path):
    path = tmp_path / "a.json"
    write_audit(
        path,
        inputs={"command": "figure", "input_paths": [str(tmp_path / "missing.json")], "log_base": "2",
                "seed": 0, "workers": 2, "grid": [0.1, 0.2]},
        results={"summary": {"rows": np.int64(2), "peak": np.float64(0.5), "skipped": float("nan")},
                 "output_path": None},
    )
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    validate(doc, _schema())
    assert doc["results"]["summary"]["rows"] == 2
    assert doc["results"]["summary"]["skipped"] is None
    assert doc["file_integrity"]["inputs"][0]["exists"] is False


def test_validate_user_audit_json_if_present():
    p = os.getenv("DIVLAB_TEST_AUDIT")
    if not p or not os.path.exists(p):
        pytest.skip("Set DIVLAB_TEST_AUDIT to path of an audit JSON to validate")
    with open(p, "r", encoding="utf-8") as f:
        doc = json.load(f)
    schema = _schema()
    Draft7Validator.check_schema(schema)
    validate(doc, schema)
