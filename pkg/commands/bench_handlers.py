"""Command handler helpers for bench handlers."""

from __future__ import annotations

from pathlib import Path
from time import perf_counter


def worst_case_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    solve_fn,
    gap_fn,
    regret_fn,
    mle_fn,
    write_json_fn,
    log_event_fn,
) -> dict:
    """Least-favorable prior at experiment.theta_max, its equalization gap and the MLE's regret on it."""
    spec = cfg.experiment
    progress_cb("worst_case", {"progress_pct": 10})
    t0 = perf_counter()
    prior = solve_fn(spec.theta_max, spec.worst_case_resolution, spec.worst_case_tol)
    solve_s = perf_counter() - t0
    progress_cb("equalization", {"progress_pct": 80})
    gap, value = gap_fn(prior, spec.worst_case_resolution)
    report = {
        "theta_max": spec.theta_max,
        "resolution": spec.worst_case_resolution,
        "support_size": prior.size,
        "gap": gap,
        "mmse": value,
        "relative_gap": gap / value if value > 0 else None,
        "mle_regret": regret_fn(prior, mle_fn),
        "prior": prior.to_dict(),
    }
    log_event_fn(
        "worst_case_report",
        run_id=run_id,
        theta_max=spec.theta_max,
        gap=gap,
        mmse=value,
        mle_regret=report["mle_regret"],
        duration_ms=int(solve_s * 1000),
    )
    path = write_json_fn(rdir, "worst_case.json", report)
    return {"outputs": [path], "summary": {k: report[k] for k in ("gap", "mmse", "mle_regret", "support_size")}}
