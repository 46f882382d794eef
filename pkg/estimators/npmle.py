"""NPMLE plug-in estimator: EM on a fixed grid with optional Frank-Wolfe atom refinement."""

# estimators/npmle.py
from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from time import perf_counter

import numpy as np
from scipy.special import logsumexp

from schemas import DiscretePrior, EstimatorResult, NpmleConfig
from utils.poisson import bayes_estimates, poisson_logpmf

logger = logging.getLogger("poisson_eb")


@dataclass
class NpmleFit:
    prior: DiscretePrior
    loglik: float
    gap: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "loglik": self.loglik,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "support": self.prior.size,
        }


def grid_size_for(theta_max: float, cfg: NpmleConfig) -> int:
    return int(cfg.grid_size or max(100, math.ceil(theta_max) * 4))


def _em(
    log_lik: np.ndarray,
    freq: np.ndarray,
    w: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int, bool]:
    # Rows scaled by their max so the likelihood matrix never underflows as a whole.
    shift = log_lik.max(axis=1, keepdims=True)
    lik = np.exp(log_lik - shift)
    base = float(np.dot(freq, shift[:, 0]))
    f = lik @ w
    ll = float(np.dot(freq, np.log(f))) + base
    for it in range(1, int(max_iter) + 1):
        w = w * (lik.T @ (freq / f))
        w = w / w.sum()
        f = lik @ w
        new_ll = float(np.dot(freq, np.log(f))) + base
        if abs(new_ll - ll) <= tol * max(1.0, abs(ll)):
            return w, new_ll, it, True
        ll = new_ll
    return w, ll, int(max_iter), False


def _directional(log_lik: np.ndarray, freq: np.ndarray, logf: np.ndarray) -> np.ndarray:
    # sum_x (N(x)/n) p(x | a) / f(x) for every candidate atom a.
    return np.exp(log_lik - logf[:, None]).T @ freq


def npmle_fit(xs, cfg: NpmleConfig | None = None) -> NpmleFit:
    """Grid prior maximizing sum_x N(x) log f_Q(x)."""
    cfg = cfg or NpmleConfig()
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        raise ValueError("npmle_fit needs a nonempty sample")
    values, counts = np.unique(xs, return_counts=True)
    freq = counts / xs.size
    theta_max = float(cfg.theta_max or xs.max())
    if theta_max <= 0:
        return NpmleFit(prior=DiscretePrior.point_mass(0.0), loglik=0.0, gap=0.0, iterations=0, converged=True)

    grid = np.linspace(0.0, theta_max, grid_size_for(theta_max, cfg))
    w = np.full(grid.size, 1.0 / grid.size)
    log_lik = poisson_logpmf(values[:, None], grid[None, :])
    w, ll, iters, converged = _em(log_lik, freq, w, cfg.tol, cfg.max_iter)

    if cfg.refine:
        fine = np.linspace(0.0, theta_max, 4 * grid.size - 3)
        for _ in range(cfg.refine_rounds):
            logf = logsumexp(log_lik + np.log(np.clip(w, 1e-300, None))[None, :], axis=1)
            deriv = _directional(poisson_logpmf(values[:, None], fine[None, :]), freq, logf)
            j = int(np.argmax(deriv))
            if deriv[j] <= 1.0 + cfg.tol or np.any(np.isclose(grid, fine[j])):
                break
            grid = np.append(grid, fine[j])
            w = np.append(w * 0.95, 0.05)
            log_lik = poisson_logpmf(values[:, None], grid[None, :])
            w, ll, more, converged = _em(log_lik, freq, w, cfg.tol, cfg.max_iter)
            iters += more

    logf = logsumexp(log_lik + np.log(np.clip(w, 1e-300, None))[None, :], axis=1)
    gap = float(_directional(log_lik, freq, logf).max() - 1.0)
    if not converged:
        logger.warning("NPMLE hit max_iter=%d (gap=%.3g)", cfg.max_iter, gap)
    prior = DiscretePrior.build(grid, w, theta_max=theta_max, prune=1e-12)
    return NpmleFit(prior=prior, loglik=ll * xs.size, gap=gap, iterations=iters, converged=converged)


def npmle_loglik(prior: DiscretePrior, xs) -> float:
    """sum_i log f_Q(X_i) for any fixed prior Q."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    values, counts = np.unique(xs, return_counts=True)
    log_lik = poisson_logpmf(values[:, None], prior.atoms[None, :])
    with np.errstate(divide="ignore"):
        logf = logsumexp(log_lik + np.log(prior.weights)[None, :], axis=1)
    return float(np.dot(counts, logf))


def npmle_estimate(xs, cfg: NpmleConfig | None = None) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    fit = npmle_fit(xs, cfg)
    return bayes_estimates(fit.prior, xs)


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    ctx = ctx or {}
    return npmle_estimate(xs, ctx.get("npmle"))


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        cfg = ctx.get("npmle") or NpmleConfig()
        fit = npmle_fit(xs, cfg)
        est = bayes_estimates(fit.prior, np.asarray(xs, dtype=np.int64))
        warnings = [] if fit.converged else [f"NPMLE did not converge (gap={fit.gap:.3g})"]
        return EstimatorResult.success("npmle", est, perf_counter() - t0, warnings=warnings)
    except Exception as e:
        return EstimatorResult.fail("npmle", "NPMLE failed", f"{type(e).__name__}: {e}", perf_counter() - t0)
