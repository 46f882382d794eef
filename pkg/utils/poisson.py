"""Poisson sampling, mixture densities, the Bayes oracle, mmse and regret accounting."""

from __future__ import annotations

import math
from time import perf_counter
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from schemas import Batch, DiscretePrior, RegretReport

TAIL_TOL = 1e-12

Estimator = Callable[[np.ndarray], np.ndarray]
ThetaSampler = Callable[[int, np.random.Generator], np.ndarray]


class MixtureSupportError(ValueError):
    """Raised when the Bayes estimate is requested at an x with f_pi(x) = 0."""


class TruncationError(ValueError):
    """Raised when an x truncation point leaves too much Poisson tail mass."""

    def __init__(self, message: str, *, required: int):
        super().__init__(message)
        self.required = int(required)


def poisson_logpmf(xs, thetas) -> np.ndarray:
    # Broadcasts; theta = 0 gives log 1{x = 0} exactly.
    x = np.asarray(xs, dtype=np.float64)
    t = np.asarray(thetas, dtype=np.float64)
    return xlogy(x, t) - t - gammaln(x + 1.0)


def _log_weights(prior: DiscretePrior) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(prior.weights)


def mixture_logpmf(prior: DiscretePrior, x) -> np.ndarray | float:
    """log f_pi(x) by log-sum-exp over atoms; -inf where the pmf is exactly 0."""
    xa = np.asarray(x, dtype=np.float64)
    flat = xa.reshape(-1, 1)
    out = logsumexp(poisson_logpmf(flat, prior.atoms[None, :]) + _log_weights(prior)[None, :], axis=1)
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


def _log_density_table(prior: DiscretePrior, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Distinct x and x+1 only; the table is shared by every position.
    uniq = np.unique(xs)
    query = np.union1d(uniq, uniq + 1)
    return query, mixture_logpmf(prior, query)


def bayes_estimates(prior: DiscretePrior, xs) -> np.ndarray:
    """Vectorized (x+1) f(x+1) / f(x) for every position of xs."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        return np.zeros(0)
    query, logf = _log_density_table(prior, xs)
    lookup = dict(zip(query.tolist(), logf.tolist()))
    uniq = np.unique(xs)
    lf = np.array([lookup[v] for v in uniq.tolist()])
    lf_next = np.array([lookup[v + 1] for v in uniq.tolist()])
    if np.any(np.isneginf(lf)):
        bad = uniq[np.isneginf(lf)].tolist()
        raise MixtureSupportError(f"x outside mixture support: {bad[:5]}")
    with np.errstate(invalid="ignore"):
        est = np.exp(np.log(uniq + 1.0) + lf_next - lf)
    est = np.nan_to_num(est, nan=0.0, posinf=prior.theta_max)
    table = dict(zip(uniq.tolist(), est.tolist()))
    return np.array([table[v] for v in xs.tolist()], dtype=np.float64)


def bayes_estimate(prior: DiscretePrior, x: int) -> float:
    """Posterior mean E[theta | X = x] in the ratio form."""
    return float(bayes_estimates(prior, [int(x)])[0])


def posterior_mean(prior: DiscretePrior, x: int) -> float:
    """Posterior mean as sum_j w_j' a_j; used to cross-check the ratio form."""
    logpost = poisson_logpmf(int(x), prior.atoms) + _log_weights(prior)
    norm = logsumexp(logpost)
    if np.isneginf(norm):
        raise MixtureSupportError(f"x outside mixture support: {int(x)}")
    return float(np.dot(np.exp(logpost - norm), prior.atoms))


def _log_tail_bound(theta: float, x: int) -> float:
    # log of (e theta / x)^x e^{-theta}, valid for x > theta.
    if theta <= 0:
        return -math.inf
    return x * (1.0 + math.log(theta) - math.log(x)) - theta


def required_x_trunc(theta_max: float, tol: float = TAIL_TOL) -> int:
    """Smallest x_trunc whose Poisson tail P(X > x_trunc) is certified below tol."""
    theta = float(theta_max)
    if theta <= 0:
        return 0
    x = int(math.floor(theta)) + 1
    log_tol = math.log(tol)
    while _log_tail_bound(theta, x) >= log_tol:
        x += 1
    return x - 1


def mmse(prior: DiscretePrior, x_trunc: int | None = None) -> float:
    """E[theta^2] - sum_{x <= x_trunc} ((x+1) f(x+1))^2 / f(x).

    The dropped tail is at most theta_max^2 times the certified tail mass, so
    the result is accurate to ~1e-12 * theta_max^2.
    """
    needed = required_x_trunc(float(prior.atoms[-1]))
    if x_trunc is None:
        x_trunc = needed
    elif int(x_trunc) < needed:
        raise TruncationError(f"x_trunc={x_trunc} too small, need at least {needed}", required=needed)
    grid = np.arange(int(x_trunc) + 2, dtype=np.float64)
    logf = mixture_logpmf(prior, grid)
    lf, lf_next = logf[:-1], logf[1:]
    finite = np.isfinite(lf) & np.isfinite(lf_next)
    terms = np.exp(2.0 * (np.log(grid[:-1][finite] + 1.0) + lf_next[finite]) - lf[finite])
    return max(prior.second_moment() - float(terms.sum()), 0.0)


def sample_batch(
    prior: DiscretePrior | ThetaSampler,
    n: int,
    rng: np.random.Generator,
    *,
    prior_id: str = "",
) -> Batch:
    if isinstance(prior, DiscretePrior):
        thetas = prior.sample(n, rng)
    else:
        thetas = np.asarray(prior(int(n), rng), dtype=np.float64)
    xs = rng.poisson(thetas)
    return Batch(xs=xs, thetas=thetas, prior_id=prior_id)


def batch_losses(estimates: np.ndarray, oracle: np.ndarray, thetas: np.ndarray) -> tuple[float, float]:
    """(Rao-Blackwellized regret, Monte Carlo squared error) averaged over positions."""
    est = np.asarray(estimates, dtype=np.float64)
    return float(np.mean((est - oracle) ** 2)), float(np.mean((est - thetas) ** 2))


def summarize_regret(
    *,
    estimator_id: str,
    prior_id: str,
    n: int,
    rb_losses,
    mc_losses,
    mmse_value: float,
    failures: int = 0,
    wall_time: float = 0.0,
) -> RegretReport:
    rb = np.asarray([v for v in rb_losses if np.isfinite(v)], dtype=np.float64)
    mc = np.asarray([v for v in mc_losses if np.isfinite(v)], dtype=np.float64)
    if rb.size == 0:
        regret, std_err, mse_mc = math.nan, 0.0, math.nan
    else:
        regret = float(rb.mean())
        std_err = float(rb.std(ddof=1) / math.sqrt(rb.size)) if rb.size > 1 else 0.0
        mse_mc = float(mc.mean()) if mc.size else math.nan
    return RegretReport(
        estimator_id=estimator_id,
        prior_id=prior_id,
        n=int(n),
        batches=int(rb.size),
        mse=mmse_value + regret,
        mmse=mmse_value,
        regret=regret,
        std_err=std_err,
        mse_mc=mse_mc,
        failures=int(failures),
        wall_time=float(wall_time),
    )


def regret_eval(
    estimator: Estimator,
    prior: DiscretePrior,
    n: int,
    batches: int,
    rng: np.random.Generator,
    *,
    estimator_id: str = "estimator",
    prior_id: str = "",
) -> RegretReport:
    """Regret of `estimator` on `prior` via mean (theta_hat - theta_hat_pi)^2 over batches."""
    rb_losses: list[float] = []
    mc_losses: list[float] = []
    failures = 0
    wall = 0.0
    for _ in range(int(batches)):
        batch = sample_batch(prior, n, rng, prior_id=prior_id)
        oracle = bayes_estimates(prior, batch.xs)
        t0 = perf_counter()
        try:
            est = np.asarray(estimator(batch.xs), dtype=np.float64)
        except Exception:
            failures += 1
            continue
        finally:
            wall += perf_counter() - t0
        if est.shape != batch.xs.shape or not np.all(np.isfinite(est)):
            failures += 1
            continue
        rb, mc = batch_losses(est, oracle, batch.thetas)
        rb_losses.append(rb)
        mc_losses.append(mc)
    return summarize_regret(
        estimator_id=estimator_id,
        prior_id=prior_id,
        n=n,
        rb_losses=rb_losses,
        mc_losses=mc_losses,
        mmse_value=mmse(prior),
        failures=failures,
        wall_time=wall,
    )


def separable_regret(prior: DiscretePrior, rule: Callable[[np.ndarray], np.ndarray], x_trunc: int | None = None) -> float:
    """Exact sum_x f(x) (rule(x) - theta_hat_pi(x))^2 for a rule that sees only its own x."""
    if x_trunc is None:
        x_trunc = required_x_trunc(float(prior.atoms[-1]))
    grid = np.arange(int(x_trunc) + 1, dtype=np.int64)
    f = np.exp(mixture_logpmf(prior, grid))
    live = f > 0
    oracle = bayes_estimates(prior, grid[live])
    est = np.asarray(rule(grid[live]), dtype=np.float64)
    return float(np.dot(f[live], (est - oracle) ** 2))
