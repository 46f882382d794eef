"""Paired t-tests and Plackett-Luce ranking fits shared by the synthetic and real-data harnesses."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import pandas as pd
from scipy.stats import ttest_rel

from schemas import RankingRecord

logger = logging.getLogger("poisson_eb")

PL_CAP = 20.0


class DegenerateInputError(ValueError):
    """Raised when a test statistic is undefined for the given input."""


def paired_t_test(losses_a, losses_b) -> float:
    """One-sided p-value for mean(a - b) < 0."""
    a = np.asarray(losses_a, dtype=np.float64).reshape(-1)
    b = np.asarray(losses_b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DegenerateInputError("paired samples differ in length")
    if a.size < 2:
        raise DegenerateInputError("paired t-test needs at least 2 pairs")
    diff = a - b
    if np.all(diff == 0):
        raise DegenerateInputError("all paired differences are zero")
    if np.all(diff == diff[0]):
        # Zero-variance nonzero shift: the ordering is certain.
        return 0.0 if diff[0] < 0 else 1.0
    return float(ttest_rel(a, b, alternative="less").pvalue)


def rankings_from_losses(losses: pd.DataFrame) -> list[RankingRecord]:
    """One record per row (trial), estimators ordered by ascending loss; ties keep column order."""
    cols = list(losses.columns)
    out: list[RankingRecord] = []
    for row in losses.to_numpy(dtype=np.float64):
        if not np.all(np.isfinite(row)):
            continue
        order = np.argsort(row, kind="stable")
        out.append(RankingRecord(order=[cols[i] for i in order]))
    return out


@dataclass
class PlackettLuceFit:
    coefficients: dict[str, float]
    iterations: int
    loglik: list[float] = field(default_factory=list)
    capped: dict[str, float] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"estimator_id": k, "coefficient": v, "capped": k in self.capped} for k, v in self.coefficients.items()]
        )


def _pl_loglik(ranks: np.ndarray, gamma: np.ndarray) -> float:
    g = gamma[ranks]
    denom = np.cumsum(g[:, ::-1], axis=1)[:, ::-1]
    return float(np.sum(np.log(g[:, :-1]) - np.log(denom[:, :-1])))


def _mm_step(ranks: np.ndarray, gamma: np.ndarray, wins: np.ndarray) -> np.ndarray:
    # Hunter's MM update: gamma_i = w_i / sum over choice stages where i was still available of 1/denominator.
    t, m = ranks.shape
    g = gamma[ranks]
    denom = np.cumsum(g[:, ::-1], axis=1)[:, ::-1][:, :-1]
    cum_inv = np.cumsum(1.0 / denom, axis=1)
    stage = np.minimum(np.arange(m), m - 2)
    per_pos = cum_inv[:, stage]
    acc = np.zeros(gamma.size)
    np.add.at(acc, ranks.reshape(-1), per_pos.reshape(-1))
    new = wins / acc
    return new / np.exp(np.mean(np.log(new)))


def plackett_luce_fit(
    records: list[RankingRecord],
    anchor_id: str,
    *,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> PlackettLuceFit:
    """Maximum-likelihood log-strengths, anchor fixed at 0."""
    if not records:
        raise DegenerateInputError("no ranking records")
    items = list(records[0].order)
    if anchor_id not in items:
        raise DegenerateInputError(f"anchor {anchor_id!r} not among ranked items")
    index = {k: i for i, k in enumerate(items)}
    try:
        ranks = np.array([[index[k] for k in r.order] for r in records], dtype=np.int64)
    except KeyError as e:
        raise DegenerateInputError(f"record ranks an unknown item: {e}") from e
    if ranks.shape[1] != len(items):
        raise DegenerateInputError("every record must rank all items")

    capped: dict[str, float] = {}
    # Items always first (or always last) have no finite MLE; cap them and fit the rest.
    live = list(range(len(items)))
    changed = True
    while changed and len(live) > 1:
        changed = False
        sub = np.array([[i for i in row if i in live] for row in ranks])
        for i in list(live):
            if np.all(sub[:, 0] == i):
                capped[items[i]] = PL_CAP
            elif np.all(sub[:, -1] == i):
                capped[items[i]] = -PL_CAP
            else:
                continue
            live.remove(i)
            changed = True
            break
    if capped:
        logger.warning("Plackett-Luce strengths diverge for %s; capping at +/-%g", sorted(capped), PL_CAP)

    log_gamma = np.zeros(len(items))
    trace: list[float] = []
    iterations = 0
    if len(live) > 1:
        sub = np.array([[live.index(i) for i in row if i in live] for row in ranks])
        m = len(live)
        wins = np.bincount(sub[:, :-1].reshape(-1), minlength=m).astype(np.float64)
        gamma = np.ones(m)
        ll = _pl_loglik(sub, gamma)
        trace.append(ll)
        for iterations in range(1, int(max_iter) + 1):
            new = _mm_step(sub, gamma, wins)
            new_ll = _pl_loglik(sub, new)
            if new_ll < ll - 1e-9 * max(1.0, abs(ll)):
                raise RuntimeError(f"Plackett-Luce log-likelihood decreased at iteration {iterations}")
            trace.append(new_ll)
            delta = float(np.max(np.abs(np.log(new) - np.log(gamma))))
            gamma, ll = new, new_ll
            if delta < tol:
                break
        for pos, i in enumerate(live):
            log_gamma[i] = math.log(gamma[pos])

    anchor = index[anchor_id]
    coefficients: dict[str, float] = {}
    if items[anchor] in capped:
        sign = -1.0 if capped[items[anchor]] > 0 else 1.0
        for k in items:
            coefficients[k] = 0.0 if k == anchor_id else (capped[k] - capped[anchor_id] if k in capped else sign * PL_CAP)
    else:
        base = log_gamma[anchor]
        for k in items:
            coefficients[k] = capped[k] if k in capped else float(log_gamma[index[k]] - base)
    return PlackettLuceFit(coefficients=coefficients, iterations=iterations, loglik=trace, capped=capped)
