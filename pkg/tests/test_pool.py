"""Tests for pool."""

from __future__ import annotations

import pytest

from utils.pool import map_collect, map_ordered, resolve_workers


def test_deterministic_mode_forces_one_worker(monkeypatch):
    monkeypatch.setenv("EB_DETERMINISTIC", "1")
    monkeypatch.setenv("EB_THREADS", "8")
    assert resolve_workers() == 1
    assert resolve_workers(3) == 3


def test_threads_env_used_when_not_deterministic(monkeypatch):
    monkeypatch.setenv("EB_DETERMINISTIC", "0")
    monkeypatch.setenv("EB_THREADS", "4")
    assert resolve_workers() == 4
    monkeypatch.setenv("EB_THREADS", "lots")
    assert resolve_workers() == 1
    assert resolve_workers(0) == 1


def test_map_ordered_keeps_input_order():
    items = list(range(20))
    assert map_ordered(lambda i: i * i, items, workers=4) == [i * i for i in items]
    assert map_ordered(lambda i: i, [], workers=4) == []


def test_map_ordered_propagates_errors():
    def fail_on_three(i):
        if i == 3:
            raise ValueError("three")
        return i

    with pytest.raises(ValueError, match="three"):
        map_ordered(fail_on_three, range(5), workers=2)


def test_map_collect_isolates_failures():
    def fail_on_odd(i):
        if i % 2:
            raise RuntimeError(f"odd {i}")
        return i

    results = map_collect(fail_on_odd, range(4), workers=2)
    assert [r.ok for r in results] == [True, False, True, False]
    assert results[2].value == 2
    assert results[1].error == "RuntimeError: odd 1"
