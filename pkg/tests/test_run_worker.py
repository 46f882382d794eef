"""Tests for run worker."""

from __future__ import annotations

import json

import pytest

from services.run_worker import execute_run
from utils.state import read_state


def _events():
    seen = []

    def log_event(event, **fields):
        seen.append((event, fields))

    return seen, log_event


def test_successful_run_records_done(tmp_path):
    seen, log_event = _events()

    def body(progress_cb):
        progress_cb("work", {"progress_pct": 50})
        out = tmp_path / "result.csv"
        out.write_text("a\n1\n", encoding="utf-8")
        return {"outputs": [out], "summary": {"rows": 1}}

    summary = execute_run(
        run_id="RunOK123456",
        subcommand="train",
        rdir=tmp_path,
        config={"seed": 4},
        seed=4,
        body_fn=body,
        log_event_fn=log_event,
    )
    assert summary["summary"] == {"rows": 1}
    state = read_state(tmp_path)
    assert state.status == "done"
    assert state.progress_pct == 100
    assert state.exit_code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "done"
    assert manifest["seed"] == 4
    assert manifest["summary"] == {"rows": 1}
    assert manifest["outputs"] == [str(tmp_path / "result.csv")]
    assert manifest["wall_time_s"] >= 0
    assert [e for e, _ in seen][0] == "run_started"


def test_nonzero_exit_code_from_body_is_kept(tmp_path):
    _, log_event = _events()
    execute_run(
        run_id="RunCert1234",
        subcommand="certify-robbins",
        rdir=tmp_path,
        config={},
        seed=0,
        body_fn=lambda cb: {"exit_code": 7},
        log_event_fn=log_event,
    )
    state = read_state(tmp_path)
    assert state.status == "done"
    assert state.exit_code == 7


def test_failure_is_recorded_then_raised(tmp_path):
    seen, log_event = _events()

    def body(progress_cb):
        raise ValueError("bad input")

    with pytest.raises(ValueError):
        execute_run(
            run_id="RunFail1234",
            subcommand="eval real",
            rdir=tmp_path,
            config={},
            seed=0,
            body_fn=body,
            log_event_fn=log_event,
            exit_code_fn=lambda e: 6,
        )
    state = read_state(tmp_path)
    assert state.status == "failed"
    assert state.error == "ValueError: bad input"
    assert state.exit_code == 6
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "failed"
    assert seen[-1][1]["status"] == "failed"
