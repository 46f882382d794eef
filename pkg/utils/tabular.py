"""Utility helpers for reading tabular inputs and writing result tables."""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd

TABULAR_FILE_EXTENSIONS = {".csv", ".tsv", ".json"}


class DatasetError(ValueError):
    """Raised when an input table does not match its documented schema."""


def _ensure_frame(df: pd.DataFrame | pd.Series) -> pd.DataFrame:
    if isinstance(df, pd.Series):
        df = df.to_frame()
    if not isinstance(df, pd.DataFrame):
        raise DatasetError("Parsed data is not tabular.")
    out = df.copy()
    out.columns = [str(c).strip().lower() for c in out.columns]
    return out


def _read_json_table(path: str) -> pd.DataFrame:
    # Records first, then line-delimited records, then a {"records": [...]} wrapper.
    try:
        return _ensure_frame(pd.read_json(path, orient="records"))
    except Exception:
        pass
    try:
        return _ensure_frame(pd.read_json(path, lines=True))
    except Exception:
        pass
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except Exception as e:
        raise DatasetError(f"Invalid JSON file: {type(e).__name__}: {e}") from e
    if isinstance(payload, dict) and isinstance(payload.get("records"), list):
        return _ensure_frame(pd.DataFrame(payload["records"]))
    if isinstance(payload, list):
        return _ensure_frame(pd.DataFrame(payload))
    raise DatasetError("Unsupported JSON table shape. Expected an array of records.")


def read_table(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"input file not found: {path}")
    ext = path.suffix.lower()
    try:
        if ext == ".csv":
            return _ensure_frame(pd.read_csv(path))
        if ext == ".tsv":
            return _ensure_frame(pd.read_csv(path, sep="\t"))
    except pd.errors.ParserError as e:
        raise DatasetError(f"could not parse {path.name}: {e}") from e
    if ext == ".json":
        return _read_json_table(str(path))
    allowed = ", ".join(sorted(TABULAR_FILE_EXTENSIONS))
    raise DatasetError(f"Unsupported tabular file type '{ext or '(none)'}'. Allowed: {allowed}")


def require_columns(df: pd.DataFrame, columns: list[str], *, source: str) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DatasetError(f"schema mismatch in {source}: missing columns {missing}")


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    # Fixed float format so reruns with the same seed produce byte-identical files.
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    df.to_csv(tmp, index=False, float_format="%.10g")
    tmp.replace(path)
    return path
