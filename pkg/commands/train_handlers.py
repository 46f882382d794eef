"""Command handler helpers for train handlers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd


def train_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    train_fn,
    save_params_fn,
    evaluate_mse_fn,
    draw_training_group_fn,
    write_csv_fn,
    log_event_fn,
    divergence_error_cls,
) -> dict:
    # Train, persist the checkpoint and the per-epoch log, then report a held-out MSE.
    epochs = cfg.schedule.epochs

    def on_epoch(epoch: int, row: dict) -> None:
        log_event_fn("training_epoch", run_id=run_id, **row)
        progress_cb("training", {"progress_pct": 5 + int(85 * epoch / epochs)})

    rng = np.random.default_rng(cfg.seed)
    try:
        result = train_fn(cfg.model, cfg.schedule, rng, progress_cb=on_epoch)
    except divergence_error_cls as e:
        write_csv_fn(pd.DataFrame(e.log, columns=["epoch", "mean_loss", "lr"]), rdir / "train_log.csv")
        raise

    ckpt = save_params_fn(result.model, rdir / "model.ebtf")
    log_path = write_csv_fn(result.log_frame(), rdir / "train_log.csv")

    progress_cb("holdout", {"progress_pct": 95})
    # Fresh priors from the training law on a stream disjoint from the training one.
    xs, thetas, _ = draw_training_group_fn(cfg.schedule, 64, np.random.default_rng([cfg.seed, 1]))
    holdout_mse = evaluate_mse_fn(result.model, xs, thetas)
    mle_mse = float(np.mean((xs - thetas) ** 2))
    log_event_fn("training_done", run_id=run_id, holdout_mse=holdout_mse, mle_mse=mle_mse, checkpoint=str(ckpt))
    return {
        "outputs": [ckpt, log_path],
        "summary": {
            "checkpoint": str(ckpt),
            "final_loss": result.log[-1]["mean_loss"] if result.log else None,
            "holdout_mse": holdout_mse,
            "holdout_mle_mse": mle_mse,
        },
    }
