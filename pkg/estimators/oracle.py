"""Bayes oracle: the posterior mean under the prior that generated the batch."""

# estimators/oracle.py
from __future__ import annotations

from time import perf_counter

import numpy as np

from schemas import DiscretePrior, EstimatorResult
from utils.poisson import bayes_estimates


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    prior = (ctx or {}).get("prior")
    if not isinstance(prior, DiscretePrior):
        raise ValueError("Bayes oracle needs the generating prior in context")
    return bayes_estimates(prior, xs)


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("bayes", estimate(xs, ctx), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail("bayes", "Bayes oracle failed", f"{type(e).__name__}: {e}", perf_counter() - t0)
