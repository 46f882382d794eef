"""Command handler helpers for probe handlers."""

from __future__ import annotations

from pathlib import Path


def probe_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    load_params_fn,
    probe_depth_profile_fn,
    prior_sampler_fn,
    checkpoint_error_cls,
    write_csv_fn,
    log_event_fn,
) -> dict:
    if not cfg.checkpoint:
        raise checkpoint_error_cls("probe needs --checkpoint")
    model = load_params_fn(cfg.checkpoint)
    progress_cb("probe", {"progress_pct": 10})
    table = probe_depth_profile_fn(
        model,
        list(cfg.probe.targets),
        prior_sampler_fn(cfg.probe),
        cfg.probe,
        seed=cfg.seed,
    )
    for row in table.to_dict(orient="records"):
        log_event_fn("probe_result", run_id=run_id, **row)
    path = write_csv_fn(table, rdir / "probes.csv")
    return {"outputs": [path], "summary": {"rows": int(len(table))}}
