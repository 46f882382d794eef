"""ERM-monotone estimator: weighted isotonic regression of Robbins targets."""

# estimators/erm.py
from __future__ import annotations

from time import perf_counter

import numpy as np
from sklearn.isotonic import IsotonicRegression

from estimators.robbins import frequency_table
from schemas import EstimatorResult


def surrogate_risk(g, counts) -> float:
    """sum_y N(y) g(y)^2 - 2 (y+1) N(y+1) g(y) over y = 0..len(counts)-2."""
    g = np.asarray(g, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    y = np.arange(counts.size - 1)
    return float(np.sum(counts[:-1] * g[: y.size] ** 2 - 2.0 * (y + 1.0) * counts[1:] * g[: y.size]))


def erm_fit(xs, cap: float | None = None) -> np.ndarray:
    """Monotone g on {0..max(xs)+1} minimizing the surrogate risk with g in [0, cap]."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        raise ValueError("erm_monotone needs a nonempty sample")
    counts = frequency_table(xs).counts.astype(np.float64)
    top = counts.size - 1  # = max(xs) + 1
    cap = float(top if cap is None else cap)
    linear = np.arange(1, top + 1, dtype=np.float64) * counts[1:]  # (y+1) N(y+1), y = 0..top-1

    # A zero-weight y sits at g(y) = g(y+1) at the optimum, so its linear term moves up one step.
    weight = counts[:top].copy()
    folded = linear.copy()
    for y in range(top - 1):
        if weight[y] == 0 and folded[y] != 0:
            folded[y + 1] += folded[y]
            folded[y] = 0.0

    active = np.flatnonzero(weight > 0)
    targets = folded[active] / weight[active]
    iso = IsotonicRegression(y_min=0.0, y_max=cap, increasing=True, out_of_bounds="clip")
    fitted = iso.fit_transform(active.astype(np.float64), targets, sample_weight=weight[active])

    g = np.full(top + 1, np.nan)
    g[active] = fitted
    # Zero-weight points take the next fitted value; past the last one, the cap.
    nxt = cap
    for y in range(top, -1, -1):
        if np.isnan(g[y]):
            g[y] = nxt
        else:
            nxt = g[y]
    return g


def erm_monotone(xs, cap: float | None = None) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    g = erm_fit(xs, cap)
    return g[xs]


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    ctx = ctx or {}
    return erm_monotone(xs, ctx.get("erm_cap", ctx.get("theta_max")))


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("erm", estimate(xs, ctx), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail("erm", "ERM-monotone failed", f"{type(e).__name__}: {e}", perf_counter() - t0)
