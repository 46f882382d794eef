"""Robbins estimator and its clipped variant from empirical frequency counts."""

# estimators/robbins.py
from __future__ import annotations

from time import perf_counter

import numpy as np

from schemas import EstimatorResult, FrequencyTable


def frequency_table(xs) -> FrequencyTable:
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        return FrequencyTable(counts=np.zeros(1, dtype=np.int64), n=0)
    if np.any(xs < 0):
        raise ValueError("counts must be nonnegative")
    # One trailing zero so N(max + 1) is always addressable.
    counts = np.bincount(xs, minlength=int(xs.max()) + 2)
    return FrequencyTable(counts=counts, n=int(xs.size))


def robbins(xs) -> np.ndarray:
    """(x+1) N(x+1) / N(x) at every position; N(x) >= 1 for observed x."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        return np.zeros(0)
    table = frequency_table(xs)
    return (xs + 1.0) * table.at(xs + 1) / table.at(xs)


def robbins_clipped(xs, d: float, M: float) -> np.ndarray:
    """min(robbins, M) for x < d and M otherwise."""
    if d < 1 or M <= 0:
        raise ValueError("robbins_clipped needs d >= 1 and M > 0")
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    raw = robbins(xs)
    return np.where(xs < d, np.minimum(raw, M), float(M))


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    return robbins(xs)


def estimate_clipped(xs, ctx: dict | None = None) -> np.ndarray:
    ctx = ctx or {}
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    d = ctx.get("d", np.inf)
    M = ctx.get("M", ctx.get("theta_max", np.inf))
    return robbins_clipped(xs, d if d is not None else np.inf, M if M is not None else np.inf)


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("robbins", robbins(xs), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail("robbins", "Robbins failed", f"{type(e).__name__}: {e}", perf_counter() - t0)


def run_clipped(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("robbins_clipped", estimate_clipped(xs, ctx), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail(
            "robbins_clipped", "Clipped Robbins failed", f"{type(e).__name__}: {e}", perf_counter() - t0
        )
