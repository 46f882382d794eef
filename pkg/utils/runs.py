"""Utility helpers for run directories and manifests."""

# utils/runs.py
from __future__ import annotations

from datetime import datetime, timezone
from importlib import metadata
import json
import os
from pathlib import Path
import secrets

UTC = timezone.utc

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "torch", "scikit-learn", "pandas", "pydantic", "PyYAML", "python-dotenv")


def outputs_root() -> Path:
    return Path(os.getenv("EB_OUTPUT_DIR", "outputs"))


def new_run_id() -> str:
    raw = secrets.token_urlsafe(10)
    cleaned = "".join(ch for ch in raw if ch.isalnum())
    return cleaned[:24] if len(cleaned) >= 8 else (cleaned + "A1B2C3D4")[:12]


def is_safe_run_id(run_id: str) -> bool:
    return run_id.isalnum() and (8 <= len(run_id) <= 32)


def run_dir(run_id: str, out: str | Path | None = None) -> Path:
    """`out` when given, else <EB_OUTPUT_DIR>/<run_id>; created on demand."""
    d = Path(out) if out else outputs_root() / run_id
    d.mkdir(parents=True, exist_ok=True)
    return d


def atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str), encoding="utf-8")
    tmp.replace(path)


def package_versions(packages=TRACKED_PACKAGES) -> dict[str, str | None]:
    out: dict[str, str | None] = {}
    for name in packages:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = None
    return out


def write_manifest(rdir: Path, *, run_id: str, subcommand: str, config: dict, seed: int, **extra) -> Path:
    payload = {
        "run_id": run_id,
        "subcommand": subcommand,
        "seed": int(seed),
        "config": config,
        "versions": package_versions(),
        "timestamp": datetime.now(UTC).isoformat().replace("+00:00", "Z"),
        **extra,
    }
    path = rdir / MANIFEST_NAME
    atomic_write_json(path, payload)
    return path


def read_manifest(rdir: Path) -> dict:
    p = rdir / MANIFEST_NAME
    if not p.exists():
        return {}
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except Exception:
        return {}


def upsert_manifest(rdir: Path, data: dict) -> None:
    current = read_manifest(rdir)
    current.update(data or {})
    atomic_write_json(rdir / MANIFEST_NAME, current)


def write_json(rdir: Path, name: str, payload: dict) -> Path:
    path = rdir / name
    atomic_write_json(path, payload)
    return path
