"""Tests for npmle."""

from __future__ import annotations

import numpy as np
import pytest

from estimators import npmle
from estimators.npmle import grid_size_for, npmle_estimate, npmle_fit, npmle_loglik
from schemas import DiscretePrior, NpmleConfig


def test_grid_size_rule():
    assert grid_size_for(10.0, NpmleConfig()) == 100
    assert grid_size_for(60.2, NpmleConfig()) == 244
    assert grid_size_for(60.2, NpmleConfig(grid_size=30)) == 30


def test_fit_is_a_valid_prior_on_zero_to_max():
    xs = np.random.default_rng(0).poisson(np.repeat([2.0, 9.0], 200))
    fit = npmle_fit(xs)
    assert fit.prior.theta_max == float(xs.max())
    assert fit.prior.atoms.min() >= 0.0
    assert fit.prior.atoms.max() <= xs.max()
    assert fit.prior.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_fit_beats_naive_priors_in_likelihood():
    xs = np.random.default_rng(1).poisson(np.repeat([1.0, 6.0], 150))
    fit = npmle_fit(xs)
    flat = DiscretePrior.build(np.linspace(0.0, xs.max(), 50), np.full(50, 1 / 50), theta_max=float(xs.max()))
    point = DiscretePrior.point_mass(float(xs.mean()), theta_max=float(xs.max()))
    assert fit.loglik == pytest.approx(npmle_loglik(fit.prior, xs), rel=1e-6)
    assert fit.loglik > npmle_loglik(flat, xs)
    assert fit.loglik > npmle_loglik(point, xs)


def test_refinement_does_not_lower_likelihood():
    xs = np.random.default_rng(3).poisson(np.repeat([0.5, 7.3], 100))
    base = npmle_fit(xs, NpmleConfig(grid_size=20))
    refined = npmle_fit(xs, NpmleConfig(grid_size=20, refine=True))
    assert refined.loglik >= base.loglik - 1e-3 * abs(base.loglik)


def test_all_zero_sample_collapses_to_zero():
    fit = npmle_fit([0, 0, 0])
    assert fit.prior.atoms.tolist() == [0.0]
    assert npmle_estimate([0, 0, 0]).tolist() == [0.0, 0.0, 0.0]


def test_estimates_are_shrunk_toward_the_bulk():
    xs = np.random.default_rng(4).poisson(5.0, size=400)
    est = npmle_estimate(xs)
    assert est.shape == xs.shape
    top = xs == xs.max()
    assert np.all(est[top] < xs[top])
    assert np.all(np.diff(est[np.argsort(xs, kind="stable")]) >= -1e-9)


def test_run_warns_on_hitting_max_iter():
    xs = np.random.default_rng(5).poisson(np.repeat([1.0, 8.0], 50))
    res = npmle.run(xs=xs, ctx={"npmle": NpmleConfig(max_iter=1, tol=1e-15)})
    assert res.ok
    assert res.warnings
    assert len(res.estimates) == xs.size


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        npmle_fit([])
