from __future__ import annotations
from pathlib import Path
from typing import Iterable, TextIO

import pandas as pd

FLOAT_FORMAT = "%.15g"


def write_csv(df: pd.DataFrame, fh: TextIO, provenance: Iterable[str] = ()) -> None:
    for line in provenance:
        fh.write(f"# {line}\n")
    df.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def export_csv(df: pd.DataFrame, path: str | Path, provenance: Iterable[str] = ()) -> None:
    """Write '#' provenance lines, then the frame; identical inputs give identical bytes."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as fh:
        write_csv(df, fh, provenance)


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")
