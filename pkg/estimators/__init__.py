"""Estimator registry keyed by string id."""

# estimators/__init__.py
from __future__ import annotations

from typing import Callable

import numpy as np

from schemas import EstimatorResult

EstimateFn = Callable[[np.ndarray, dict], np.ndarray]
RunFn = Callable[..., EstimatorResult]


def _registry() -> dict[str, tuple[EstimateFn, RunFn]]:
    # Imported lazily so the torch-backed transformer module loads only when asked for.
    from estimators import erm, gold_standard, mle, npmle, oracle, robbins

    def _transformer_estimate(xs, ctx):
        from estimators import transformer

        return transformer.estimate(xs, ctx)

    def _transformer_run(*, xs, ctx):
        from estimators import transformer

        return transformer.run(xs=xs, ctx=ctx)

    return {
        "mle": (mle.estimate, mle.run),
        "robbins": (robbins.estimate, robbins.run),
        "robbins_clipped": (robbins.estimate_clipped, robbins.run_clipped),
        "erm": (erm.estimate, erm.run),
        "npmle": (npmle.estimate, npmle.run),
        "gs": (gold_standard.estimate, gold_standard.run),
        "transformer": (_transformer_estimate, _transformer_run),
        "bayes": (oracle.estimate, oracle.run),
    }


ESTIMATOR_IDS = ("mle", "robbins", "robbins_clipped", "erm", "npmle", "gs", "transformer", "bayes")


def validate_ids(ids) -> list[str]:
    unknown = [i for i in ids if i not in ESTIMATOR_IDS]
    if unknown:
        raise KeyError(f"Unknown estimator(s): {', '.join(unknown)}")
    return list(ids)


def get_estimator(estimator_id: str) -> EstimateFn:
    validate_ids([estimator_id])
    return _registry()[estimator_id][0]


def run_estimator(estimator_id: str, xs, ctx: dict | None = None) -> EstimatorResult:
    validate_ids([estimator_id])
    return _registry()[estimator_id][1](xs=xs, ctx=ctx or {})


def bind(estimator_id: str, ctx: dict | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Estimator as a plain xs -> estimates function with a fixed context."""
    fn = get_estimator(estimator_id)
    ctx = dict(ctx or {})
    return lambda xs: np.asarray(fn(np.asarray(xs, dtype=np.int64), ctx), dtype=np.float64)
