"""Service-layer logic for the per-batch wall-time benchmark."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from time import perf_counter
from typing import Callable

import numpy as np
import pandas as pd

from estimators import bind, validate_ids
from schemas import TimingConfig
from utils.poisson import sample_batch
from utils.priors import multinomial_grid_prior

logger = logging.getLogger("poisson_eb")

EPOCH_BATCHES = 192
TIMING_COLUMNS = ["estimator_id", "n", "seconds_per_batch", "seconds_per_epoch", "repeats", "status"]


@dataclass
class TimingResult:
    table: pd.DataFrame
    slopes: pd.DataFrame


def loglog_slope(lengths, seconds) -> float:
    """Least-squares slope of log(seconds) on log(n); nan with fewer than two usable points."""
    n = np.asarray(lengths, dtype=np.float64)
    t = np.asarray(seconds, dtype=np.float64)
    keep = np.isfinite(t) & (t > 0) & (n > 0)
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(n[keep]), np.log(t[keep]), 1)
    return float(slope)


def _time_cell(
    fn: Callable[[np.ndarray], np.ndarray],
    batches: list[np.ndarray],
    repeats: int,
    timeout_s: float,
) -> tuple[float, int, str]:
    per_batch: list[float] = []
    spent = 0.0
    for _ in range(repeats):
        t0 = perf_counter()
        for xs in batches:
            fn(xs)
        elapsed = perf_counter() - t0
        spent += elapsed
        per_batch.append(elapsed / len(batches))
        if spent > timeout_s:
            return math.nan, len(per_batch), "timeout"
    return float(np.median(per_batch)), len(per_batch), "ok"


def timing_benchmark(
    cfg: TimingConfig,
    *,
    seed: int = 0,
    ctx: dict | None = None,
    progress_cb: Callable[[str, dict], None] | None = None,
) -> TimingResult:
    """Median-of-repeats seconds per batch for each (estimator, n), run sequentially."""
    validate_ids(cfg.estimators)
    rng = np.random.default_rng(seed)
    prior = multinomial_grid_prior(51, cfg.theta_max, rng)
    inputs = {n: [sample_batch(prior, n, rng).xs for _ in range(cfg.batches)] for n in sorted(cfg.lengths)}
    base_ctx = {"theta_max": cfg.theta_max, "prior": prior, **(ctx or {})}

    rows = []
    for est_id in cfg.estimators:
        fn = bind(est_id, base_ctx)
        timed_out = False
        for n, batches in inputs.items():
            if progress_cb:
                progress_cb("timing", {"estimator_id": est_id, "n": n})
            if timed_out:
                # Cost grows with n, so larger cells of an estimator that already timed out are skipped.
                rows.append(_row(est_id, n, math.nan, 0, "skipped"))
                continue
            try:
                fn(batches[0])
                seconds, done, status = _time_cell(fn, batches, cfg.repeats, cfg.timeout_s)
            except Exception as e:
                logger.warning("timing %s at n=%d failed: %s: %s", est_id, n, type(e).__name__, e)
                rows.append(_row(est_id, n, math.nan, 0, "failed"))
                continue
            timed_out = status == "timeout"
            rows.append(_row(est_id, n, seconds, done, status))

    table = pd.DataFrame(rows, columns=TIMING_COLUMNS)
    slopes = pd.DataFrame(
        [
            {"estimator_id": est_id, "slope": loglog_slope(part["n"], part["seconds_per_batch"])}
            for est_id, part in table.groupby("estimator_id", sort=False)
        ],
        columns=["estimator_id", "slope"],
    )
    return TimingResult(table=table, slopes=slopes)


def _row(est_id: str, n: int, seconds: float, repeats: int, status: str) -> dict:
    return {
        "estimator_id": est_id,
        "n": n,
        "seconds_per_batch": seconds,
        "seconds_per_epoch": seconds * EPOCH_BATCHES,
        "repeats": repeats,
        "status": status,
    }
