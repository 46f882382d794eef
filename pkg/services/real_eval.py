"""Service-layer logic for scoring estimators on real prediction tasks."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable

import numpy as np
import pandas as pd

from schemas import PredictionTask, ScoreRow
from utils.stats import DegenerateInputError, paired_t_test, plackett_luce_fit, rankings_from_losses

EstimateFn = Callable[[np.ndarray, dict], np.ndarray]


class UnbalancedPanelError(ValueError):
    def __init__(self, message: str, *, missing: list[tuple[str, str]]):
        super().__init__(message)
        self.missing = missing


def _ratio(value: float, baseline: float) -> float:
    if baseline == 0:
        return 1.0 if value == 0 else math.inf
    return value / baseline


def _errors(task: PredictionTask, estimates: np.ndarray) -> tuple[float, float]:
    # Y_hat = n_Y theta_hat; both metrics normalized by n_Y.
    resid = task.n_y * np.asarray(estimates, dtype=np.float64) - task.ys
    rmse = float(np.sqrt(np.mean(resid**2))) / task.n_y
    mae = float(np.mean(np.abs(resid))) / task.n_y
    return rmse, mae


def score_task(
    task: PredictionTask,
    estimator_id: str,
    estimate_fn: EstimateFn,
    ctx: dict | None = None,
) -> ScoreRow:
    """Estimates come from xs alone; ys are read only after both estimators have run."""
    xs = task.xs.copy()
    estimates = np.asarray(estimate_fn(xs, dict(ctx or {})), dtype=np.float64)
    if estimates.shape != task.xs.shape:
        raise ValueError(f"{estimator_id} returned {estimates.shape} estimates for {task.xs.shape} inputs")
    rmse, mae = _errors(task, estimates)
    rmse_mle, mae_mle = _errors(task, task.xs.astype(np.float64))
    return ScoreRow(
        task_id=task.task_id,
        estimator_id=estimator_id,
        rmse_norm=rmse,
        mae_norm=mae,
        rmse_ratio_vs_mle=_ratio(rmse, rmse_mle),
        mae_ratio_vs_mle=_ratio(mae, mae_mle),
        n_items=int(task.xs.size),
    )


@dataclass
class AggregateResult:
    table: pd.DataFrame
    ttests: pd.DataFrame
    plackett_luce: pd.DataFrame


def rows_frame(rows: list[ScoreRow] | pd.DataFrame) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows.copy()
    return pd.DataFrame([r.model_dump() for r in rows])


def aggregate_scores(rows: list[ScoreRow] | pd.DataFrame, *, anchor: str = "mle") -> AggregateResult:
    """Mean percentage improvement over MLE with a normal-approximation 95% CI, plus t-tests and PL."""
    df = rows_frame(rows)
    if df.empty:
        raise UnbalancedPanelError("no score rows", missing=[])
    estimators = sorted(df["estimator_id"].unique())
    tasks = sorted(df["task_id"].unique())
    present = set(zip(df["task_id"], df["estimator_id"]))
    missing = [(t, e) for t in tasks for e in estimators if (t, e) not in present]
    if missing:
        raise UnbalancedPanelError(f"unbalanced panel, missing cells: {missing[:10]}", missing=missing)

    table_rows = []
    for metric in ("rmse", "mae"):
        for est in estimators:
            ratios = df[df["estimator_id"] == est][f"{metric}_ratio_vs_mle"].to_numpy(dtype=np.float64)
            improvement = 100.0 * (1.0 - ratios)
            improvement = improvement[np.isfinite(improvement)]
            t = improvement.size
            mean = float(improvement.mean()) if t else math.nan
            sd = float(improvement.std(ddof=1)) if t > 1 else 0.0
            half = 1.96 * sd / math.sqrt(t) if t else math.nan
            table_rows.append(
                {
                    "estimator_id": est,
                    "metric": metric,
                    "mean_improvement_pct": mean,
                    "ci_low": mean - half,
                    "ci_high": mean + half,
                    "ci_half_width": half,
                    "n_tasks": t,
                }
            )

    wide = df.pivot(index="task_id", columns="estimator_id", values="rmse_norm").sort_index()
    ttest_rows = []
    if anchor in wide.columns:
        for est in estimators:
            if est == anchor:
                continue
            try:
                p = paired_t_test(wide[est].to_numpy(), wide[anchor].to_numpy())
                note = ""
            except DegenerateInputError as e:
                p, note = math.nan, str(e)
            ttest_rows.append({"estimator_id": est, "baseline": anchor, "p_value": p, "note": note})

    pl = pd.DataFrame(columns=["estimator_id", "coefficient", "capped"])
    if anchor in wide.columns and len(estimators) > 1:
        records = rankings_from_losses(wide[estimators])
        if records:
            pl = plackett_luce_fit(records, anchor).to_frame()

    return AggregateResult(
        table=pd.DataFrame(table_rows),
        ttests=pd.DataFrame(ttest_rows, columns=["estimator_id", "baseline", "p_value", "note"]),
        plackett_luce=pl,
    )
