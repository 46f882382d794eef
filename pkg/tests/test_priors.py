"""Tests for priors."""

from __future__ import annotations

import numpy as np
import pytest

from schemas import DirichletProcessSpec, DiscretePrior, NeuralPriorConfig, ThetaMaxLaw
from utils.priors import (
    ACTIVATIONS,
    NeuralComponent,
    discretize_neural_prior,
    discretize_samples,
    multinomial_grid_prior,
    sample_dirichlet_batch,
    sample_neural_prior,
    sample_theta_base_batch,
    sample_theta_max,
    sample_theta_max_branch,
    sample_training_thetas,
)


def test_discrete_prior_rejects_bad_weights():
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([0.0, 1.0]), weights=np.array([0.5, 0.6]), theta_max=1.0)
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([1.0, 0.0]), weights=np.array([0.5, 0.5]), theta_max=1.0)
    with pytest.raises(ValueError):
        DiscretePrior(atoms=np.array([0.0, 3.0]), weights=np.array([0.5, 0.5]), theta_max=2.0)


def test_build_merges_duplicates_and_prunes():
    prior = DiscretePrior.build([2.0, 1.0, 2.0, 3.0], [0.25, 0.25, 0.5, 1e-15], prune=1e-12)
    assert prior.atoms.tolist() == [1.0, 2.0]
    assert prior.weights.tolist() == pytest.approx([0.25, 0.75])
    assert prior.theta_max == 2.0


def test_prior_dict_round_trip_and_pmf_at():
    prior = DiscretePrior.build([0.0, 5.0], [0.4, 0.6], theta_max=10.0)
    again = DiscretePrior.from_dict(prior.to_dict())
    assert again.theta_max == 10.0
    assert again.pmf_at([5.0, 2.5]).tolist() == pytest.approx([0.6, 0.0])


def test_neural_pushforward_lies_in_unit_interval():
    rng = np.random.default_rng(0)
    spec = sample_neural_prior(rng, NeuralPriorConfig(hidden=8, components=4))
    assert len(spec.components) == 4
    assert spec.mixture.sum() == pytest.approx(1.0)
    base = sample_theta_base_batch(spec, 500, rng)
    assert base.shape == (500,)
    assert np.all((base >= 0.0) & (base <= 1.0))


def test_unknown_activation_rejected():
    with pytest.raises(ValueError):
        NeuralComponent(w1=np.ones((2, 1)), w2=np.ones((1, 2)), activation="softsign")
    assert "tanhshrink" in ACTIVATIONS


def test_dirichlet_batch_repeats_values():
    rng = np.random.default_rng(3)
    out = sample_dirichlet_batch(DirichletProcessSpec(alpha=1.0), 200, rng)
    assert out.shape == (200,)
    assert np.all((out >= 0.0) & (out <= 1.0))
    # A small concentration reuses earlier draws heavily.
    assert np.unique(out).size < 50


def test_dirichlet_batch_with_large_alpha_is_mostly_fresh():
    out = sample_dirichlet_batch(DirichletProcessSpec(alpha=1e6), 100, np.random.default_rng(4))
    assert np.unique(out).size >= 99


def test_theta_max_law_respects_cap():
    law = ThetaMaxLaw()
    values, branch = sample_theta_max_branch(law, 5000, np.random.default_rng(5))
    assert values.min() >= 0.0
    assert values.max() <= law.cap
    assert set(np.unique(branch).tolist()) == {0, 1, 2}
    assert np.mean(branch == 0) == pytest.approx(0.75, abs=0.03)
    assert 0.0 <= sample_theta_max(law, np.random.default_rng(6)) <= law.cap


def test_multinomial_grid_prior_on_uniform_grid():
    prior = multinomial_grid_prior(51, 50.0, np.random.default_rng(7))
    assert prior.theta_max == 50.0
    assert prior.size <= 51
    assert np.all(np.isin(prior.atoms, np.linspace(0.0, 50.0, 51)))
    assert prior.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_discretize_samples_keeps_mean():
    samples = np.random.default_rng(8).uniform(0.0, 10.0, size=10_000)
    prior = discretize_samples(samples, 10.0, grid=100)
    assert prior.size == 100
    assert prior.mean() == pytest.approx(samples.mean(), rel=1e-9)


def test_discretize_neural_prior_scales_to_theta_max():
    rng = np.random.default_rng(9)
    spec = sample_neural_prior(rng, NeuralPriorConfig(hidden=4, components=2))
    prior = discretize_neural_prior(spec, 20.0, rng, draws=2000, grid=50)
    assert prior.theta_max == 20.0
    assert prior.atoms.max() <= 20.0


def test_training_thetas_by_kind():
    rng = np.random.default_rng(10)
    kw = {"dirichlet": DirichletProcessSpec(), "neural": NeuralPriorConfig(hidden=4, components=2)}
    for kind in ("neural", "dirichlet"):
        thetas = sample_training_thetas(kind, 64, 30.0, rng, **kw)
        assert thetas.shape == (64,)
        assert thetas.max() <= 30.0
    with pytest.raises(ValueError):
        sample_training_thetas("gamma", 4, 1.0, rng, **kw)


def test_dirichlet_distinct_count_matches_the_crp_mean():
    rng = np.random.default_rng(8)
    spec = DirichletProcessSpec(alpha=50.0)
    counts = [np.unique(sample_dirichlet_batch(spec, 512, rng)).size for _ in range(1000)]
    assert np.mean(counts) == pytest.approx(121.1, abs=1.5)


def test_theta_max_law_without_cauchy_branch_has_reduced_mixture_mean():
    law = ThetaMaxLaw(weights=[0.75 / 0.875, 0.125 / 0.875, 0.0])
    values, branch = sample_theta_max_branch(law, 200_000, np.random.default_rng(9))
    assert not np.any(branch == 2)
    assert values.mean() == pytest.approx((0.75 * 100.0 + 0.125 * 50.0) / 0.875, abs=1.0)
