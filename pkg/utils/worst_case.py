"""Least-favorable prior on [0, theta_max] by fully-corrective Frank-Wolfe on a grid."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import json
import logging
import os
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from schemas import DiscretePrior
from utils.poisson import poisson_logpmf, required_x_trunc

logger = logging.getLogger("poisson_eb")

PRUNE_WEIGHT = 1e-10
SQRT_STEP = 1.0 / 3.0
FRESH_MASS = 0.1
DEFAULT_CACHE_DIR = ".cache/poisson_eb"


class WorstCasePriorError(RuntimeError):
    """Raised when Frank-Wolfe stops before the equalization gap reaches tol."""

    def __init__(self, message: str, *, gap: float):
        super().__init__(message)
        self.gap = float(gap)


@dataclass
class _Channel:
    grid: np.ndarray
    logp: np.ndarray  # (grid, x_trunc + 2)
    p: np.ndarray
    x_plus: np.ndarray  # x + 1 for x = 0..x_trunc


def _channel(theta_max: float, resolution: float) -> _Channel:
    steps = max(1, int(np.ceil(theta_max / resolution - 1e-9)))
    grid = np.linspace(0.0, theta_max, steps + 1)
    x_trunc = required_x_trunc(theta_max)
    xs = np.arange(x_trunc + 2, dtype=np.float64)
    logp = poisson_logpmf(xs[None, :], grid[:, None])
    return _Channel(grid=grid, logp=logp, p=np.exp(logp), x_plus=xs[1:])


def _bayes_rule(ch: _Channel, support: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # theta_hat(x) and log f(x) on x = 0..x_trunc for the prior sum w_j delta_{grid[support_j]}.
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    logf = logsumexp(ch.logp[support] + logw[:, None], axis=0)
    lf, lf_next = logf[:-1], logf[1:]
    with np.errstate(invalid="ignore"):
        est = np.exp(np.log(ch.x_plus) + lf_next - lf)
    theta_max = ch.grid[-1]
    est = np.where(np.isfinite(lf), np.nan_to_num(est, nan=theta_max, posinf=theta_max), theta_max)
    return est, lf


def _pointwise_mse(ch: _Channel, est: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
    # MSE_{delta_theta}(est) for every grid theta (or the listed rows).
    grid = ch.grid if rows is None else ch.grid[rows]
    p = ch.p[:, :-1] if rows is None else ch.p[rows, :-1]
    return np.sum(p * (est[None, :] - grid[:, None]) ** 2, axis=1)


def _polish(ch: _Channel, support: np.ndarray, w0: np.ndarray) -> np.ndarray:
    # Maximize the concave mmse(w) over the simplex on a fixed support.
    def objective(w):
        w = np.clip(w, 0.0, None)
        est, _ = _bayes_rule(ch, support, w / max(w.sum(), 1e-300))
        risk = _pointwise_mse(ch, est, support)
        return -float(np.dot(w, risk)), -risk

    res = minimize(
        objective,
        w0,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * support.size,
        constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0, "jac": lambda w: np.ones_like(w)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    w = np.clip(res.x, 0.0, None)
    return w / w.sum()


def equalization_gap(prior: DiscretePrior, resolution: float = 0.05) -> tuple[float, float]:
    """(max_theta MSE_{delta_theta}(theta_hat_pi) - mmse(pi), mmse(pi)) on the grid."""
    ch = _channel(prior.theta_max, resolution)
    support = np.clip(np.searchsorted(ch.grid, prior.atoms), 0, ch.grid.size - 1)
    est, _ = _bayes_rule(ch, support, prior.weights)
    risk = _pointwise_mse(ch, est)
    value = float(np.dot(prior.weights, _pointwise_mse(ch, est, support)))
    return float(risk.max() - value), value


def _sqrt_spaced(ch: _Channel, lo: int, hi: int, step: float) -> np.ndarray:
    # Grid indices evenly spaced in sqrt(theta) from grid[lo] to grid[hi], endpoints included.
    a, b = np.sqrt(ch.grid[lo]), np.sqrt(ch.grid[hi])
    k = max(1, int(np.ceil((b - a) / step)))
    thetas = np.linspace(a, b, k + 1) ** 2
    last = ch.grid.size - 1
    idx = np.rint(thetas / ch.grid[-1] * last).astype(int)
    return np.unique(np.clip(np.concatenate([[lo, hi], idx]), 0, last))


def worst_case_prior(
    theta_max: float,
    grid_resolution: float = 0.05,
    tol: float = 1e-4,
    max_iter: int = 500,
) -> DiscretePrior:
    """Least-favorable prior with equalization gap <= tol * max(1, mmse), weights below 1e-10 pruned.

    Starts from atoms evenly spaced in sqrt(theta) with uniform weights. Each round adds the
    grid point of largest risk together with sqrt-spaced fill towards its nearest atom, then
    re-optimizes all weights on the enlarged support.
    """
    theta_max = float(theta_max)
    if theta_max <= 0:
        raise ValueError("theta_max must be positive")
    ch = _channel(theta_max, grid_resolution)
    support = _sqrt_spaced(ch, 0, ch.grid.size - 1, SQRT_STEP)
    w = np.full(support.size, 1.0 / support.size)
    step = SQRT_STEP
    previous = -1
    gap = np.inf
    for it in range(int(max_iter)):
        w = _polish(ch, support, w)
        keep = w >= PRUNE_WEIGHT
        support, w = support[keep], w[keep] / w[keep].sum()

        est, _ = _bayes_rule(ch, support, w)
        risk = _pointwise_mse(ch, est)
        value = float(np.dot(w, risk[support]))
        gap = float(risk.max() - value)
        if gap <= tol * max(1.0, value):
            logger.info(
                json.dumps(
                    {
                        "event": "worst_case_converged",
                        "theta_max": theta_max,
                        "iterations": it + 1,
                        "gap": gap,
                        "mmse": value,
                        "atoms": int(support.size),
                    },
                    sort_keys=True,
                )
            )
            return DiscretePrior.build(ch.grid[support], w, theta_max=theta_max)

        # Frank-Wolfe vertex: the grid atom with the largest pointwise risk.
        j = int(np.argmax(risk))
        # A vertex that lost all its weight right after being added sits in a sparse stretch.
        step = step / 2 if j == previous else SQRT_STEP
        previous = j
        nearest = int(support[np.argmin(np.abs(support - j))])
        fresh = np.setdiff1d(_sqrt_spaced(ch, min(j, nearest), max(j, nearest), step), support)
        if fresh.size == 0:
            continue
        merged = np.concatenate([support, fresh])
        order = np.argsort(merged)
        support = merged[order]
        w = np.concatenate([w * (1.0 - FRESH_MASS), np.full(fresh.size, FRESH_MASS / fresh.size)])[order]
    raise WorstCasePriorError(f"worst-case prior did not converge in {max_iter} iterations (gap={gap:.3g})", gap=gap)


def cache_dir() -> Path:
    return Path(os.getenv("EB_CACHE_DIR", DEFAULT_CACHE_DIR))


def _cache_path(root: Path, theta_max: float, resolution: float, tol: float) -> Path:
    return root / f"worst_case_t{theta_max:g}_r{resolution:g}_tol{tol:g}.json"


def load_or_solve_worst_case(
    theta_max: float,
    grid_resolution: float = 0.05,
    tol: float = 1e-4,
    max_iter: int = 500,
    *,
    root: Path | None = None,
) -> DiscretePrior:
    """Worst-case prior from the on-disk cache, solving and caching on a miss."""
    root = root or cache_dir()
    path = _cache_path(root, float(theta_max), grid_resolution, tol)
    if path.exists():
        try:
            return DiscretePrior.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except Exception:
            logger.warning("Ignoring unreadable worst-case cache entry %s", path)
    prior = worst_case_prior(theta_max, grid_resolution, tol, max_iter)
    root.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(prior.to_dict(), indent=2), encoding="utf-8")
    tmp.replace(path)
    return prior


@lru_cache(maxsize=16)
def cached_worst_case(theta_max: float, grid_resolution: float = 0.05, tol: float = 1e-4) -> DiscretePrior:
    return load_or_solve_worst_case(theta_max, grid_resolution, tol)
