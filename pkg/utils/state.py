"""Utility helpers for run state."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from pathlib import Path
import json
from typing import Literal, Optional

from utils.runs import atomic_write_json

UTC = timezone.utc

Status = Literal["queued", "running", "failed", "done"]
STATE_NAME = "state.json"


def _utc_now() -> str:
    return datetime.now(UTC).isoformat().replace("+00:00", "Z")


@dataclass
class RunState:
    run_id: str
    subcommand: str
    status: Status
    created_at: str
    updated_at: str
    error: Optional[str] = None
    stage: Optional[str] = None
    progress_pct: int = 0
    exit_code: Optional[int] = None


def state_path(run_dir: Path) -> Path:
    return Path(run_dir) / STATE_NAME


def write_state(run_dir: Path, state: RunState) -> None:
    state.updated_at = _utc_now()
    atomic_write_json(state_path(run_dir), asdict(state))


def read_state(run_dir: Path) -> Optional[RunState]:
    """None when the file is missing or unreadable."""
    p = state_path(run_dir)
    if not p.exists():
        return None
    try:
        return RunState(**json.loads(p.read_text(encoding="utf-8")))
    except (ValueError, TypeError):
        return None


def new_state(run_id: str, subcommand: str) -> RunState:
    now = _utc_now()
    return RunState(run_id=run_id, subcommand=subcommand, status="queued", created_at=now, updated_at=now, stage="queued")
