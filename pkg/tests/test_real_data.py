"""Tests for real data."""

from __future__ import annotations

import numpy as np
import pytest

from utils.real_data import TaskSkipped, load_mlb, load_nhl, load_wordfreq, split_sentences
from utils.tabular import DatasetError


def _write(path, text: str):
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return path


NHL_CSV = """
season,player_id,position,goals
2019,p1,C,10
2019,p2,D,3
2019,p3,LW,7
2019,p4,C,0
2020,p1,C,12
2020,p2,D,1
2020,p3,LW,5
2021,p1,C,8
2021,p5,RW,4
"""


def test_nhl_pairs_consecutive_seasons_on_shared_players(tmp_path):
    tasks = load_nhl(_write(tmp_path / "nhl.csv", NHL_CSV))
    assert [t.task_id for t in tasks] == ["nhl:2019->2020:all", "nhl:2020->2021:all"]
    first = tasks[0]
    assert first.meta["players"] == ["p1", "p2", "p3"]
    assert first.xs.tolist() == [10, 3, 7]
    assert first.ys.tolist() == [12, 1, 5]
    assert tasks[1].xs.tolist() == [12]
    assert first.n_y == 1.0


def test_nhl_position_filter(tmp_path):
    tasks = load_nhl(_write(tmp_path / "nhl.csv", NHL_CSV), position="center")
    assert [t.xs.tolist() for t in tasks] == [[10], [12]]


def test_nhl_missing_column(tmp_path):
    path = _write(tmp_path / "nhl.csv", "season,player_id,goals\n2019,p1,3")
    with pytest.raises(DatasetError, match="position"):
        load_nhl(path)


def test_nhl_negative_goals_rejected(tmp_path):
    path = _write(tmp_path / "nhl.csv", "season,player_id,position,goals\n2019,p1,C,-1\n2020,p1,C,2")
    with pytest.raises(DatasetError):
        load_nhl(path)


MLB_CSV = """
date,player_id,role,count
2021-04-01,b1,batting,2
2021-04-20,b1,batting,1
2021-09-20,b1,batting,3
2021-04-05,b2,batting,0
2021-09-01,b2,batting,4
2021-05-01,p1,pitching,5
2021-09-30,p1,pitching,6
"""


def test_mlb_calendar_halves_by_role(tmp_path):
    out = load_mlb(_write(tmp_path / "mlb.csv", MLB_CSV))
    (batting,) = out["batting"]
    (pitching,) = out["pitching"]
    assert batting.task_id == "mlb:2021:batting"
    assert batting.meta["players"] == ["b1", "b2"]
    assert batting.xs.tolist() == [3, 0]
    assert batting.ys.tolist() == [3, 4]
    assert pitching.xs.tolist() == [5]
    assert pitching.ys.tolist() == [6]


def test_mlb_player_in_both_roles_rejected(tmp_path):
    text = MLB_CSV.strip() + "\n2021-06-01,b1,pitching,1\n"
    with pytest.raises(DatasetError, match="both roles"):
        load_mlb(_write(tmp_path / "mlb.csv", text))


def test_mlb_single_date_has_no_midpoint(tmp_path):
    text = "date,player_id,role,count\n2021-04-01,b1,batting,1\n2021-04-01,b2,batting,2\n"
    with pytest.raises(DatasetError, match="midpoint"):
        load_mlb(_write(tmp_path / "mlb.csv", text))


def test_split_sentences():
    assert split_sentences("One here. Two there!  Three?") == ["One here.", "Two there!", "Three?"]
    assert split_sentences("") == []


def _document(n_sentences: int) -> str:
    words = ["river", "stone", "bridge", "lantern", "harbor", "meadow", "copper", "violet"]
    return " ".join(f"The {words[i % 8]} and the {words[(3 * i) % 8]} met again." for i in range(n_sentences))


def test_wordfreq_splits_head_and_tail():
    task = load_wordfreq(_document(60), head_tokens=30, task_id="doc1")
    assert task.task_id == "doc1"
    assert task.xs.shape == task.ys.shape
    assert task.xs.sum() >= 30
    assert task.meta["head_sentences"] + task.meta["tail_sentences"] == 60
    assert task.n_y == pytest.approx(task.meta["tail_sentences"] / task.meta["head_sentences"])
    assert "the" not in task.meta["vocabulary"]


def test_wordfreq_short_document_skipped():
    with pytest.raises(TaskSkipped):
        load_wordfreq(_document(3), head_tokens=2000)


def _shuffled(text: str, seed: int) -> str:
    header, *rows = text.strip().splitlines()
    order = np.random.default_rng(seed).permutation(len(rows))
    return "\n".join([header, *(rows[i] for i in order)])


def test_row_order_does_not_change_tasks(tmp_path):
    nhl = load_nhl(_write(tmp_path / "nhl.csv", NHL_CSV))
    nhl_shuffled = load_nhl(_write(tmp_path / "nhl_s.csv", _shuffled(NHL_CSV, 0)))
    assert [(t.task_id, t.xs.tolist(), t.ys.tolist()) for t in nhl] == [
        (t.task_id, t.xs.tolist(), t.ys.tolist()) for t in nhl_shuffled
    ]

    mlb = load_mlb(_write(tmp_path / "mlb.csv", MLB_CSV))
    mlb_shuffled = load_mlb(_write(tmp_path / "mlb_s.csv", _shuffled(MLB_CSV, 1)))
    for role in ("batting", "pitching"):
        a, b = mlb[role], mlb_shuffled[role]
        assert [(t.meta["players"], t.xs.tolist(), t.ys.tolist()) for t in a] == [
            (t.meta["players"], t.xs.tolist(), t.ys.tolist()) for t in b
        ]


def test_skipped_task_is_a_value_error():
    assert issubclass(TaskSkipped, ValueError)
    assert not issubclass(TaskSkipped, DatasetError)
