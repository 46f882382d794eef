"""Service-layer logic for the run lifecycle: state, manifest and outputs."""

from __future__ import annotations

from pathlib import Path
from time import perf_counter
from typing import Callable

from utils.runs import upsert_manifest, write_manifest
from utils.state import RunState, new_state, write_state

ProgressFn = Callable[[str, dict], None]


def _set_stage(st: RunState, rdir: Path, *, stage: str, progress_pct: int) -> None:
    st.stage = stage
    st.progress_pct = max(0, min(100, int(progress_pct)))
    write_state(rdir, st)


def execute_run(
    *,
    run_id: str,
    subcommand: str,
    rdir: Path,
    config: dict,
    seed: int,
    body_fn: Callable[[ProgressFn], dict],
    log_event_fn,
    exit_code_fn: Callable[[BaseException], int] | None = None,
) -> dict:
    """Runs `body_fn` inside the state/manifest envelope; failures are recorded, then re-raised."""
    st = new_state(run_id, subcommand)
    write_state(rdir, st)
    write_manifest(rdir, run_id=run_id, subcommand=subcommand, config=config, seed=seed)
    log_event_fn("run_started", run_id=run_id, subcommand=subcommand, seed=seed, out=str(rdir))

    t_run = perf_counter()
    try:
        st.status = "running"
        st.error = None
        _set_stage(st, rdir, stage="starting", progress_pct=1)
        log_event_fn("run_status_updated", run_id=run_id, status=st.status)

        def on_progress(stage: str, meta: dict) -> None:
            _set_stage(st, rdir, stage=stage, progress_pct=meta.get("progress_pct", st.progress_pct))

        summary = body_fn(on_progress) or {}
        wall = perf_counter() - t_run
        upsert_manifest(
            rdir,
            {
                "status": "done",
                "wall_time_s": wall,
                "outputs": sorted(str(p) for p in summary.get("outputs", [])),
                "summary": summary.get("summary", {}),
            },
        )
        st.status = "done"
        st.exit_code = int(summary.get("exit_code", 0))
        _set_stage(st, rdir, stage="done", progress_pct=100)
        log_event_fn("run_status_updated", run_id=run_id, status=st.status, duration_ms=int(wall * 1000))
        return summary
    except Exception as e:
        st.status = "failed"
        st.error = f"{type(e).__name__}: {e}"
        st.exit_code = exit_code_fn(e) if exit_code_fn else 1
        _set_stage(st, rdir, stage="failed", progress_pct=100)
        log_event_fn("run_status_updated", run_id=run_id, status=st.status, error=st.error)
        try:
            upsert_manifest(rdir, {"status": "failed", "error": st.error, "wall_time_s": perf_counter() - t_run})
        except Exception:
            pass
        raise
