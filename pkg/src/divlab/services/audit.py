from __future__ import annotations
import json
import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

from divlab.version import __version__

CHUNK = 1 << 20


def _file_stamp(path: str | Path | None) -> dict:
    """{path, exists, size_bytes, sha256}; missing files keep the nulls."""
    if not path or not Path(path).is_file():
        return {"path": str(path) if path else None, "exists": False, "size_bytes": None, "sha256": None}
    digest = hashlib.sha256()
    size = 0
    with Path(path).open("rb") as fh:
        while block := fh.read(CHUNK):
            digest.update(block)
            size += len(block)
    return {"path": str(path), "exists": True, "size_bytes": size, "sha256": digest.hexdigest()}


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "model_dump"):
        return obj.model_dump(mode="json")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and obj != obj:
        return None
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_audit(path: str | Path, inputs: Dict[str, Any], results: Dict[str, Any]) -> None:
    """One JSON record per run: command, compact summary, file stamps and full payloads."""
    inputs = inputs or {}
    results = results or {}
    summary = results.get("summary", {}) or {}

    record = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "app_version": __version__,

        # compact snapshot
        "run_summary": _jsonable({
            "command": inputs.get("command"),
            "log_base": inputs.get("log_base"),
            "seed": inputs.get("seed"),
            "workers": inputs.get("workers"),
            "rows": summary.get("rows"),
            "value": summary.get("value"),
        }),

        # file integrity stamps
        "file_integrity": {
            "inputs": [_file_stamp(p) for p in inputs.get("input_paths", ())],
            "output": _file_stamp(results.get("output_path")),
        },

        # full payloads
        "inputs": _jsonable(inputs),
        "results": _jsonable(results),
    }

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(record, indent=2), encoding="utf-8")
