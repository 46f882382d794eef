"""Gold-standard estimator: the Bayes rule of the least-favorable prior on [0, theta_max]."""

# estimators/gold_standard.py
from __future__ import annotations

from time import perf_counter
from typing import Callable

import numpy as np

from schemas import EstimatorResult
from utils.poisson import bayes_estimates
from utils.worst_case import cached_worst_case


def gold_standard(
    theta_max: float,
    grid_resolution: float = 0.05,
    tol: float = 1e-4,
) -> Callable[[np.ndarray], np.ndarray]:
    """x -> bayes_estimate(worst_case_prior(theta_max), x); ignores the rest of the sequence."""
    prior = cached_worst_case(float(theta_max), grid_resolution, tol)

    def _estimate(xs) -> np.ndarray:
        return bayes_estimates(prior, np.asarray(xs, dtype=np.int64))

    return _estimate


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    ctx = ctx or {}
    if ctx.get("theta_max") is None:
        raise ValueError("gold standard needs theta_max in context")
    return gold_standard(
        float(ctx["theta_max"]),
        float(ctx.get("worst_case_resolution", 0.05)),
        float(ctx.get("worst_case_tol", 1e-4)),
    )(xs)


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("gs", estimate(xs, ctx), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail("gs", "Gold standard failed", f"{type(e).__name__}: {e}", perf_counter() - t0)
