"""Command handler helpers for eval handlers."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger("poisson_eb")

REGRET_COLUMNS = ["family", "estimator_id", "n", "batches", "mse", "mmse", "regret", "std_err", "mse_mc", "failures"]


def transformer_ctx(cfg, estimators: list[str], *, load_params_fn, checkpoint_error_cls) -> dict:
    # Only a run that asks for the transformer needs a checkpoint.
    if "transformer" not in estimators:
        return {}
    if not cfg.checkpoint:
        raise checkpoint_error_cls("the transformer estimator needs --checkpoint")
    return {"model": load_params_fn(cfg.checkpoint)}


def synthetic_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    workers: int | None,
    run_synthetic_fn,
    run_ablation_fn,
    load_params_fn,
    checkpoint_error_cls,
    write_csv_fn,
    log_event_fn,
) -> dict:
    spec = cfg.experiment
    if spec.ablation:
        table = run_ablation_fn(cfg.model, cfg.schedule, spec, seed=cfg.seed, progress_cb=progress_cb)
        path = write_csv_fn(table, rdir / "ablation.csv")
        log_event_fn("stage_completed", run_id=run_id, stage="ablation", rows=len(table))
        return {"outputs": [path], "summary": {"ablation_rows": len(table)}}

    ctx = transformer_ctx(cfg, spec.estimators, load_params_fn=load_params_fn, checkpoint_error_cls=checkpoint_error_cls)
    ctx["npmle"] = cfg.npmle
    result = run_synthetic_fn(spec, seed=cfg.seed, ctx=ctx, workers=workers, progress_cb=progress_cb)
    for stage, ms in result.timings_ms.items():
        log_event_fn("stage_completed", run_id=run_id, stage=stage, duration_ms=ms)

    # Wall times vary run to run; they go to the manifest, not the CSVs.
    regret = result.regret
    wall = regret.groupby("estimator_id")["wall_time"].sum().to_dict() if "wall_time" in regret else {}
    outputs = [
        write_csv_fn(regret.reindex(columns=REGRET_COLUMNS), rdir / "regret.csv"),
        write_csv_fn(result.ttest, rdir / "ttest.csv"),
        write_csv_fn(result.plackett_luce, rdir / "pl.csv"),
        write_csv_fn(result.losses, rdir / "losses.csv"),
    ]
    missing = regret[regret["batches"] == 0][["family", "n", "estimator_id"]].to_dict(orient="records")
    return {
        "outputs": outputs,
        "summary": {
            "cells": int(len(regret)),
            "missing_cells": missing,
            "estimator_wall_time_s": {k: float(v) for k, v in wall.items()},
            "timings_ms": result.timings_ms,
        },
    }


def load_tasks(real_cfg, *, load_nhl_fn, load_mlb_fn, load_wordfreq_fn, dataset_error_cls, task_skipped_cls):
    """(tasks, skipped rows) for the configured dataset."""
    if not real_cfg.dataset:
        raise dataset_error_cls("real.dataset is not set (nhl, mlb or wordfreq)")
    if not real_cfg.path:
        raise dataset_error_cls("real.path is not set")
    path = Path(real_cfg.path)
    if not path.exists():
        raise dataset_error_cls(f"input not found: {path}")

    if real_cfg.dataset == "nhl":
        return load_nhl_fn(path, real_cfg.position), []
    if real_cfg.dataset == "mlb":
        by_role = load_mlb_fn(path, real_cfg.split)
        return [t for role in ("batting", "pitching") for t in by_role.get(role, [])], []

    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    if not files:
        raise dataset_error_cls(f"no .txt files under {path}")
    tasks, skipped = [], []
    for f in files:
        try:
            tasks.append(
                load_wordfreq_fn(f.read_text(encoding="utf-8", errors="replace"), real_cfg.head_tokens, task_id=f.stem)
            )
        except task_skipped_cls as e:
            logger.warning("Skipping %s: %s", f.name, e.reason)
            skipped.append({"task_id": f.stem, "reason": e.reason})
    if not tasks:
        raise dataset_error_cls("every document was skipped")
    return tasks, skipped


def real_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    load_tasks_fn,
    get_estimator_fn,
    score_task_fn,
    aggregate_scores_fn,
    write_csv_fn,
    log_event_fn,
) -> dict:
    real_cfg = cfg.real
    progress_cb("load", {"progress_pct": 5})
    tasks, skipped = load_tasks_fn(real_cfg)
    estimators = list(dict.fromkeys(["mle", *real_cfg.estimators]))
    log_event_fn("stage_completed", run_id=run_id, stage="load", tasks=len(tasks), skipped=len(skipped))

    rows = []
    for i, task in enumerate(tasks):
        progress_cb("score", {"progress_pct": 10 + int(80 * i / max(1, len(tasks)))})
        # ERM caps at one past the largest count seen.
        tmax = real_cfg.theta_max or float(max(1, int(np.max(task.xs))) + 1)
        ctx = {"theta_max": tmax, "npmle": cfg.npmle}
        for est_id in estimators:
            try:
                rows.append(score_task_fn(task, est_id, get_estimator_fn(est_id), ctx))
            except Exception as e:
                logger.warning("%s failed on %s: %s: %s", est_id, task.task_id, type(e).__name__, e)

    agg = aggregate_scores_fn(rows)
    outputs = [
        write_csv_fn(pd.DataFrame([r.model_dump() for r in rows]), rdir / "scores.csv"),
        write_csv_fn(agg.table, rdir / "improvement.csv"),
        write_csv_fn(agg.ttests, rdir / "ttest.csv"),
        write_csv_fn(agg.plackett_luce, rdir / "pl.csv"),
    ]
    if skipped:
        outputs.append(write_csv_fn(pd.DataFrame(skipped, columns=["task_id", "reason"]), rdir / "skipped.csv"))
    return {"outputs": outputs, "summary": {"tasks": len(tasks), "skipped": len(skipped)}}


def timing_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    timing_benchmark_fn,
    build_model_fn,
    load_params_fn,
    write_csv_fn,
    log_event_fn,
) -> dict:
    ctx = {}
    if "transformer" in cfg.timing.estimators:
        # Cost does not depend on the weights, so an untrained model stands in when no checkpoint is given.
        ctx["model"] = load_params_fn(cfg.checkpoint) if cfg.checkpoint else build_model_fn(cfg.model)
    result = timing_benchmark_fn(cfg.timing, seed=cfg.seed, ctx=ctx, progress_cb=progress_cb)
    for row in result.slopes.to_dict(orient="records"):
        log_event_fn("timing_slope", run_id=run_id, estimator_id=row["estimator_id"], slope=float(row["slope"]))
    return {
        "outputs": [
            write_csv_fn(result.table, rdir / "timing.csv"),
            write_csv_fn(result.slopes, rdir / "timing_slopes.csv"),
        ],
        "summary": {"slopes": {r["estimator_id"]: float(r["slope"]) for r in result.slopes.to_dict(orient="records")}},
    }
