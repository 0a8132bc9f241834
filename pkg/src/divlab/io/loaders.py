from __future__ import annotations
import json
import re
from pathlib import Path
from typing import Any, Dict

from divlab.core.exceptions import InputFormatError, InvalidDistributionError
from divlab.core.models import JointPMF, ProbVec

# accepted spellings for the payload key, first match wins
PMF_KEY_ALIASES = ("masses", "pmf", "p")
JOINT_KEY_ALIASES = ("matrix", "joint", "rows")


def _read_document(path_or_text, label: str) -> tuple[Dict[str, Any], str]:
    text = str(path_or_text)
    if not text.lstrip().startswith("{"):
        p = Path(path_or_text)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputFormatError(f"{label}: cannot read {p}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{label}: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise InputFormatError(f"{label}: top level must be a JSON object", line=1)
    return doc, text


def _key_line(text: str, key: str) -> int:
    m = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _pick(doc: Dict[str, Any], aliases, label: str) -> str:
    lower = {k.lower().strip(): k for k in doc}
    for a in aliases:
        if a in lower:
            return lower[a]
    raise InputFormatError(f"{label}: missing key. Expected one of {list(aliases)}", line=1)


def load_pmf(path_or_text, label: str = "pmf") -> ProbVec:
    """Read {"masses": [...]} from a file path or a JSON string."""
    doc, text = _read_document(path_or_text, label)
    key = _pick(doc, PMF_KEY_ALIASES, label)
    values = doc[key]
    if not isinstance(values, list) or any(isinstance(v, (list, dict, str, bool)) or v is None for v in values):
        raise InputFormatError(f"{label}: '{key}' must be a flat list of numbers", line=_key_line(text, key))
    try:
        return ProbVec.parse(values, label=label)
    except InvalidDistributionError as exc:
        raise InvalidDistributionError(f"line {_key_line(text, key)}: {exc}") from exc


def load_joint(path_or_text, label: str = "joint") -> JointPMF:
    """Read {"matrix": [[...], ...]} (rows indexed by x, columns by y)."""
    doc, text = _read_document(path_or_text, label)
    key = _pick(doc, JOINT_KEY_ALIASES, label)
    rows = doc[key]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InputFormatError(f"{label}: '{key}' must be a list of rows", line=_key_line(text, key))
    if len({len(r) for r in rows}) != 1:
        raise InputFormatError(f"{label}: rows of '{key}' have different lengths", line=_key_line(text, key))
    try:
        return JointPMF.parse(rows, label=label)
    except InvalidDistributionError as exc:
        raise InvalidDistributionError(f"line {_key_line(text, key)}: {exc}") from exc
