"""Maximum-likelihood baseline: theta_hat(x) = x."""

# estimators/mle.py
from __future__ import annotations

from time import perf_counter

import numpy as np

from schemas import EstimatorResult


def mle(xs) -> np.ndarray:
    return np.asarray(xs, dtype=np.float64).reshape(-1).copy()


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    return mle(xs)


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("mle", mle(xs), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail("mle", "MLE failed", f"{type(e).__name__}: {e}", perf_counter() - t0)
