"""Tests for stats."""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from schemas import RankingRecord
from utils.stats import (
    PL_CAP,
    DegenerateInputError,
    paired_t_test,
    plackett_luce_fit,
    rankings_from_losses,
)


def test_t_test_constant_shift():
    a = np.array([1.0, 2.0, 3.0])
    assert paired_t_test(a - 0.5, a) == 0.0
    assert paired_t_test(a + 0.5, a) == 1.0


def test_t_test_all_zero_differences_raise():
    with pytest.raises(DegenerateInputError):
        paired_t_test([1.0, 2.0], [1.0, 2.0])


def test_t_test_needs_two_pairs_of_equal_length():
    with pytest.raises(DegenerateInputError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(DegenerateInputError):
        paired_t_test([1.0, 2.0], [2.0])


def test_t_test_is_one_sided():
    rng = np.random.default_rng(0)
    b = rng.normal(size=200)
    a = b - 0.3 + 0.1 * rng.normal(size=200)
    assert paired_t_test(a, b) < 1e-6
    assert paired_t_test(b, a) > 1 - 1e-6


def test_rankings_from_losses_orders_and_skips_nan():
    losses = pd.DataFrame({"mle": [3.0, 1.0, np.nan], "erm": [1.0, 1.0, 2.0], "npmle": [2.0, 0.5, 1.0]})
    records = rankings_from_losses(losses)
    assert [r.order for r in records] == [["erm", "npmle", "mle"], ["npmle", "mle", "erm"]]


def test_ranking_record_rejects_repeats():
    with pytest.raises(ValueError):
        RankingRecord(order=["mle", "mle"])


def test_two_item_strengths_match_win_ratio():
    records = [RankingRecord(order=["a", "b"])] * 3 + [RankingRecord(order=["b", "a"])]
    fit = plackett_luce_fit(records, "b")
    assert fit.coefficients["b"] == 0.0
    assert fit.coefficients["a"] == pytest.approx(math.log(3.0), abs=1e-6)


def test_three_items_anchor_and_monotone_likelihood():
    orders = [["a", "b", "c"]] * 5 + [["b", "a", "c"]] * 3 + [["c", "b", "a"]] * 2 + [["b", "c", "a"]] * 2
    fit = plackett_luce_fit([RankingRecord(order=o) for o in orders], "c")
    assert fit.coefficients["c"] == 0.0
    assert fit.coefficients["b"] > fit.coefficients["c"]
    assert np.all(np.diff(fit.loglik) >= -1e-9)
    assert not fit.capped


def test_always_first_item_is_capped():
    orders = [["a", "b", "c"]] * 4 + [["a", "c", "b"]] * 2
    fit = plackett_luce_fit([RankingRecord(order=o) for o in orders], "b")
    assert fit.capped == {"a": PL_CAP}
    assert fit.coefficients["a"] == PL_CAP
    assert fit.coefficients["b"] == 0.0
    assert fit.coefficients["c"] == pytest.approx(-math.log(2.0), abs=1e-6)
    frame = fit.to_frame()
    assert list(frame.columns) == ["estimator_id", "coefficient", "capped"]
    assert frame.set_index("estimator_id").loc["a", "capped"]


def test_pl_rejects_missing_anchor_and_empty_input():
    with pytest.raises(DegenerateInputError):
        plackett_luce_fit([], "mle")
    with pytest.raises(DegenerateInputError):
        plackett_luce_fit([RankingRecord(order=["a", "b"])], "mle")


def test_paired_t_test_matches_the_student_t_cdf():
    from scipy.stats import t as student_t

    rng = np.random.default_rng(12)
    b = rng.normal(size=1000)
    a = b + rng.normal(0.03, 1.0, size=1000)
    diff = a - b
    t_stat = diff.mean() / (diff.std(ddof=1) / math.sqrt(diff.size))
    expected = float(student_t.cdf(t_stat, df=diff.size - 1))
    assert paired_t_test(a, b) == pytest.approx(expected, rel=1e-6, abs=1e-12)
