"""Utility helpers for worker pools."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import os
from typing import Any, Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def _is_truthy(value: str | None, default: bool = False) -> bool:
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, str(default)))
    except ValueError:
        return default


@dataclass
class PoolResult:
    ok: bool
    value: Any = None
    error: str | None = None


def resolve_workers(requested: int | None = None) -> int:
    """Worker cap from the argument or EB_THREADS; EB_DETERMINISTIC forces one."""
    if _is_truthy(os.getenv("EB_DETERMINISTIC"), default=True) and requested is None:
        return 1
    n = requested if requested is not None else _env_int("EB_THREADS", 1)
    return max(1, int(n))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], *, workers: int | None = None) -> list[R]:
    """fn over items, results in input order; exceptions propagate."""
    items = list(items)
    workers = resolve_workers(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def map_collect(fn: Callable[[T], R], items: Iterable[T], *, workers: int | None = None) -> list[PoolResult]:
    """Like map_ordered but one failure never aborts the others."""

    def _safe(item: T) -> PoolResult:
        try:
            return PoolResult(ok=True, value=fn(item))
        except Exception as e:
            return PoolResult(ok=False, error=f"{type(e).__name__}: {e}")

    return map_ordered(_safe, items, workers=workers)
