"""Tests for worst case."""

from __future__ import annotations

import numpy as np
import pytest

from schemas import DiscretePrior
from utils import worst_case
from utils.poisson import mmse
from utils.worst_case import equalization_gap, load_or_solve_worst_case, worst_case_prior


def test_small_theta_max_equalizes_risk():
    prior = worst_case_prior(2.0, grid_resolution=0.05, tol=1e-4)
    gap, value = equalization_gap(prior, 0.05)
    assert prior.theta_max == 2.0
    assert gap <= 1e-4 + 1e-9
    assert value == pytest.approx(mmse(prior), rel=1e-6)


def test_worst_case_beats_a_uniform_grid_prior():
    prior = worst_case_prior(3.0, grid_resolution=0.1, tol=1e-4)
    uniform = DiscretePrior.build(np.linspace(0.0, 3.0, 31), np.full(31, 1.0 / 31), theta_max=3.0)
    assert mmse(prior) >= mmse(uniform) - 1e-4


def test_rejects_nonpositive_theta_max():
    with pytest.raises(ValueError):
        worst_case_prior(0.0)


def test_cache_is_written_once_and_reused(tmp_path, monkeypatch):
    calls = {"n": 0}

    def fake_solve(theta_max, resolution, tol, max_iter):
        calls["n"] += 1
        return DiscretePrior.build([0.0, theta_max], [0.4, 0.6], theta_max=theta_max)

    monkeypatch.setattr(worst_case, "worst_case_prior", fake_solve)
    first = load_or_solve_worst_case(4.0, 0.05, 1e-4, root=tmp_path)
    second = load_or_solve_worst_case(4.0, 0.05, 1e-4, root=tmp_path)

    assert calls["n"] == 1
    assert list(tmp_path.glob("worst_case_*.json"))
    assert second.atoms.tolist() == first.atoms.tolist()
    assert second.weights.tolist() == pytest.approx(first.weights.tolist())


def test_unreadable_cache_entry_is_resolved_again(tmp_path, monkeypatch):
    monkeypatch.setattr(
        worst_case,
        "worst_case_prior",
        lambda theta_max, resolution, tol, max_iter: DiscretePrior.point_mass(theta_max),
    )
    (tmp_path / "worst_case_t4_r0.05_tol0.0001.json").write_text("{broken", encoding="utf-8")
    prior = load_or_solve_worst_case(4.0, 0.05, 1e-4, root=tmp_path)
    assert prior.atoms.tolist() == [4.0]


@pytest.fixture(scope="module")
def theta50_prior():
    return worst_case_prior(50.0, grid_resolution=0.05, tol=1e-4)


def test_theta_max_50_converges_with_relative_gap(theta50_prior):
    gap, value = equalization_gap(theta50_prior, 0.05)
    assert theta50_prior.theta_max == 50.0
    assert gap <= 1e-4 * value + 1e-9
    assert len(theta50_prior.atoms) > 2


def test_theta_max_50_mle_regret_matches_reference(theta50_prior):
    # MLE risk under any prior is E[theta].
    regret = float(np.dot(theta50_prior.weights, theta50_prior.atoms)) - mmse(theta50_prior)
    assert regret == pytest.approx(11.73, rel=0.05)


def test_mmse_is_nondecreasing_in_theta_max(theta50_prior):
    values = [mmse(worst_case_prior(t, grid_resolution=0.05, tol=1e-4)) for t in (1.0, 5.0, 10.0)]
    values.append(mmse(theta50_prior))
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))


def test_repeated_solves_agree():
    a = worst_case_prior(10.0, grid_resolution=0.05, tol=1e-4)
    b = worst_case_prior(10.0, grid_resolution=0.05, tol=1e-4)
    assert a.atoms.tolist() == pytest.approx(b.atoms.tolist(), abs=1e-9)
    assert a.weights.tolist() == pytest.approx(b.weights.tolist(), abs=1e-9)


def test_iteration_budget_exhaustion_reports_gap():
    with pytest.raises(worst_case.WorstCasePriorError) as info:
        worst_case_prior(10.0, grid_resolution=0.05, tol=1e-14, max_iter=1)
    assert info.value.gap > 0


def test_tiny_theta_max_collapses_to_zero():
    prior = worst_case_prior(1e-9)
    assert float(np.dot(prior.weights, prior.atoms)) == pytest.approx(0.0, abs=1e-9)
    assert mmse(prior) == pytest.approx(0.0, abs=1e-9)
