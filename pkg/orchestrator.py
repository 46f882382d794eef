"""Synthetic experiment driver: shared batches per cell, regret tables, paired tests and rankings."""

# orchestrator.py
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from time import perf_counter
from typing import Callable

import numpy as np
import pandas as pd

from estimators import bind, validate_ids
from schemas import Batch, DiscretePrior, ExperimentSpec, ModelConfig, NeuralPriorConfig, TrainSchedule
from utils.pool import map_ordered
from utils.poisson import bayes_estimates, batch_losses, mmse, sample_batch, summarize_regret
from utils.priors import (
    discretize_neural_prior,
    multinomial_grid_prior,
    sample_neural_prior,
    sample_training_thetas,
)
from utils.stats import DegenerateInputError, paired_t_test, plackett_luce_fit, rankings_from_losses
from utils.worst_case import cached_worst_case

logger = logging.getLogger("poisson_eb")

FAMILY_CODES = {"worst_case": 0, "multinomial": 1, "neural": 2}
LOSS_COLUMNS = ["family", "n", "prior_index", "batch", "estimator_id", "loss", "mse_mc"]
TTEST_COLUMNS = ["family", "n", "estimator_id", "baseline", "pairs", "p_value", "note"]
PL_COLUMNS = ["family", "n", "estimator_id", "coefficient", "capped"]


class CancelledError(RuntimeError):
    """Raised when a run receives a cooperative cancellation signal."""


@dataclass
class _CellPrior:
    prior: DiscretePrior
    mmse: float
    batches: list[Batch]
    oracles: list[np.ndarray]


@dataclass
class SyntheticResult:
    regret: pd.DataFrame
    ttest: pd.DataFrame
    plackett_luce: pd.DataFrame
    losses: pd.DataFrame
    timings_ms: dict[str, int] = field(default_factory=dict)


def cell_rng(seed: int, family: str, n: int, prior_index: int) -> np.random.Generator:
    # Seed-derived per (family, n, prior) so every estimator in a cell sees the same xs.
    return np.random.default_rng([int(seed), FAMILY_CODES[family], int(n), int(prior_index)])


def sample_family_prior(
    spec: ExperimentSpec,
    family: str,
    rng: np.random.Generator,
    neural_cfg: NeuralPriorConfig | None = None,
) -> DiscretePrior:
    if family == "worst_case":
        return cached_worst_case(spec.theta_max, spec.worst_case_resolution, spec.worst_case_tol)
    if family == "multinomial":
        return multinomial_grid_prior(
            spec.grid_size, spec.theta_max, rng, concentration=spec.dirichlet_concentration
        )
    if family == "neural":
        neural_cfg = neural_cfg or NeuralPriorConfig()
        return discretize_neural_prior(
            sample_neural_prior(rng, neural_cfg),
            spec.theta_max,
            rng,
            draws=neural_cfg.discretize_draws,
            grid=neural_cfg.discretize_grid,
        )
    raise ValueError(f"Unknown prior family: {family}")


def _cell_priors(spec: ExperimentSpec, family: str, n: int, seed: int) -> list[_CellPrior]:
    count = 1 if family == "worst_case" else spec.priors_per_cell
    out: list[_CellPrior] = []
    for p in range(count):
        rng = cell_rng(seed, family, n, p)
        prior = sample_family_prior(spec, family, rng)
        batches = [sample_batch(prior, n, rng, prior_id=family) for _ in range(spec.batches)]
        out.append(
            _CellPrior(
                prior=prior,
                mmse=mmse(prior),
                batches=batches,
                oracles=[bayes_estimates(prior, b.xs) for b in batches],
            )
        )
    return out


def _estimator_ctx(spec: ExperimentSpec, base_ctx: dict, prior: DiscretePrior) -> dict:
    ctx = {
        "theta_max": spec.theta_max,
        "worst_case_resolution": spec.worst_case_resolution,
        "worst_case_tol": spec.worst_case_tol,
    }
    ctx.update(base_ctx)
    ctx["prior"] = prior
    return ctx


def run_cell(
    spec: ExperimentSpec,
    family: str,
    n: int,
    *,
    seed: int,
    ctx: dict | None = None,
) -> tuple[list[dict], list[dict]]:
    """Regret rows and per-batch loss rows for one (family, n) cell."""
    priors = _cell_priors(spec, family, n, seed)
    regret_rows: list[dict] = []
    loss_rows: list[dict] = []
    for est_id in spec.estimators:
        cap = spec.batch_caps.get(est_id, spec.batches)
        rb, mc, mm = [], [], []
        failures = 0
        wall = 0.0
        for p_idx, cp in enumerate(priors):
            fn = bind(est_id, _estimator_ctx(spec, ctx or {}, cp.prior))
            for b_idx, (batch, oracle) in enumerate(zip(cp.batches[:cap], cp.oracles[:cap])):
                t0 = perf_counter()
                try:
                    est = fn(batch.xs)
                except Exception as e:
                    failures += 1
                    logger.warning("%s failed on %s n=%d batch %d: %s: %s", est_id, family, n, b_idx, type(e).__name__, e)
                    continue
                finally:
                    wall += perf_counter() - t0
                if est.shape != batch.xs.shape or not np.all(np.isfinite(est)):
                    failures += 1
                    continue
                loss, mse_mc = batch_losses(est, oracle, batch.thetas)
                rb.append(loss)
                mc.append(mse_mc)
                mm.append(cp.mmse)
                loss_rows.append(
                    {
                        "family": family,
                        "n": n,
                        "prior_index": p_idx,
                        "batch": b_idx,
                        "estimator_id": est_id,
                        "loss": loss,
                        "mse_mc": mse_mc,
                    }
                )
        report = summarize_regret(
            estimator_id=est_id,
            prior_id=family,
            n=n,
            rb_losses=rb,
            mc_losses=mc,
            mmse_value=float(np.mean(mm)) if mm else math.nan,
            failures=failures,
            wall_time=wall,
        )
        regret_rows.append({"family": family, **report.to_row()})
    return regret_rows, loss_rows


def _paired_tests(losses: pd.DataFrame, anchor: str) -> pd.DataFrame:
    rows = []
    for (family, n), cell in losses.groupby(["family", "n"], sort=False):
        wide = cell.pivot_table(index=["prior_index", "batch"], columns="estimator_id", values="loss")
        if anchor not in wide.columns:
            continue
        for est in wide.columns:
            if est == anchor:
                continue
            pair = wide[[est, anchor]].dropna()
            try:
                p, note = paired_t_test(pair[est].to_numpy(), pair[anchor].to_numpy()), ""
            except DegenerateInputError as e:
                p, note = math.nan, str(e)
            rows.append(
                {
                    "family": family,
                    "n": n,
                    "estimator_id": est,
                    "baseline": anchor,
                    "pairs": len(pair),
                    "p_value": p,
                    "note": note,
                }
            )
    return pd.DataFrame(rows, columns=TTEST_COLUMNS)


def _rankings(losses: pd.DataFrame, estimators: list[str], anchor: str) -> pd.DataFrame:
    frames = []
    for (family, n), cell in losses.groupby(["family", "n"], sort=False):
        wide = cell.pivot_table(index=["prior_index", "batch"], columns="estimator_id", values="loss")
        cols = [e for e in estimators if e in wide.columns]
        if anchor not in cols or len(cols) < 2:
            continue
        records = rankings_from_losses(wide[cols].dropna())
        if not records:
            continue
        fit = plackett_luce_fit(records, anchor).to_frame()
        fit.insert(0, "n", n)
        fit.insert(0, "family", family)
        frames.append(fit)
    if not frames:
        return pd.DataFrame(columns=PL_COLUMNS)
    return pd.concat(frames, ignore_index=True)[PL_COLUMNS]


def run_synthetic(
    spec: ExperimentSpec,
    *,
    seed: int = 0,
    ctx: dict | None = None,
    workers: int | None = None,
    progress_cb: Callable[[str, dict], None] | None = None,
    should_cancel: Callable[[], bool] | None = None,
) -> SyntheticResult:
    validate_ids(spec.estimators)
    timings_ms: dict[str, int] = {}

    def _check_cancel() -> None:
        if should_cancel and should_cancel():
            raise CancelledError("Run canceled.")

    # 1) Priors: warm the worst-case cache once, before cells fan out.
    _check_cancel()
    if progress_cb:
        progress_cb("priors", {"progress_pct": 5})
    t0 = perf_counter()
    if "worst_case" in spec.families or "gs" in spec.estimators:
        cached_worst_case(spec.theta_max, spec.worst_case_resolution, spec.worst_case_tol)
    timings_ms["priors"] = int((perf_counter() - t0) * 1000)

    # 2) Cells: each (family, n) on its own seed-derived stream.
    _check_cancel()
    if progress_cb:
        progress_cb("cells", {"progress_pct": 10})
    cells = [(family, n) for family in spec.families for n in spec.lengths]
    t0 = perf_counter()
    parts = map_ordered(lambda c: run_cell(spec, c[0], c[1], seed=seed, ctx=ctx), cells, workers=workers)
    timings_ms["cells"] = int((perf_counter() - t0) * 1000)
    regret = pd.DataFrame([row for rows, _ in parts for row in rows])
    losses = pd.DataFrame([row for _, rows in parts for row in rows], columns=LOSS_COLUMNS)

    # 3) Statistics on the shared batches.
    _check_cancel()
    if progress_cb:
        progress_cb("statistics", {"progress_pct": 85})
    t0 = perf_counter()
    ttest = _paired_tests(losses, spec.anchor)
    pl = _rankings(losses, spec.estimators, spec.anchor)
    timings_ms["statistics"] = int((perf_counter() - t0) * 1000)

    if progress_cb:
        progress_cb("done", {"progress_pct": 100})
    return SyntheticResult(regret=regret, ttest=ttest, plackett_luce=pl, losses=losses, timings_ms=timings_ms)


ABLATION_MIXES = {
    "neural": {"neural": 1.0, "dirichlet": 0.0},
    "dirichlet": {"neural": 0.0, "dirichlet": 1.0},
    "mixture": {"neural": 0.5, "dirichlet": 0.5},
}


def run_mixture_ablation(
    model_cfg: ModelConfig,
    schedule: TrainSchedule,
    spec: ExperimentSpec,
    *,
    seed: int = 0,
    train_fn: Callable | None = None,
    progress_cb: Callable[[str, dict], None] | None = None,
) -> pd.DataFrame:
    """Three twins trained on neural-only, Dirichlet-only and mixed priors, cross-evaluated by MSE."""
    from model.training import evaluate_mse, train

    train_fn = train_fn or train
    n = spec.lengths[0]
    held_out: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    for code, kind in enumerate(("neural", "dirichlet")):
        rng = np.random.default_rng([int(seed), 97, code])
        pairs = []
        for _ in range(spec.batches):
            thetas = sample_training_thetas(
                kind, n, spec.theta_max, rng, dirichlet=schedule.dirichlet, neural=schedule.neural
            )
            pairs.append((rng.poisson(thetas), thetas))
        held_out[kind] = pairs

    rows = []
    for i, (trained_on, mix) in enumerate(ABLATION_MIXES.items()):
        if progress_cb:
            progress_cb(f"ablation_{trained_on}", {"progress_pct": 10 + 25 * i})
        twin_schedule = schedule.model_copy(update={"prior_mix": mix})
        result = train_fn(model_cfg, twin_schedule, np.random.default_rng(seed))
        for evaluated_on, pairs in held_out.items():
            mse = float(np.mean([evaluate_mse(result.model, xs, th) for xs, th in pairs]))
            rows.append({"trained_on": trained_on, "evaluated_on": evaluated_on, "mse": mse})
    return pd.DataFrame(rows, columns=["trained_on", "evaluated_on", "mse"])
