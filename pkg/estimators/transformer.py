"""Trained tinyformer as an estimator: forward pass on the raw count sequence."""

# estimators/transformer.py
from __future__ import annotations

from functools import lru_cache
from time import perf_counter

import numpy as np
import torch

from model.checkpoint import load_params
from model.tinyformer import TinyFormer
from schemas import EstimatorResult


@lru_cache(maxsize=8)
def _load_cached(path: str) -> TinyFormer:
    return load_params(path)


def resolve_model(ctx: dict) -> TinyFormer:
    model = ctx.get("model")
    if isinstance(model, TinyFormer):
        return model
    path = ctx.get("checkpoint")
    if not path:
        raise ValueError("transformer estimator needs a model or checkpoint path in context")
    return _load_cached(str(path))


def estimate(xs, ctx: dict | None = None) -> np.ndarray:
    model = resolve_model(ctx or {})
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    with torch.no_grad():
        out, _ = model(torch.as_tensor(xs)[None, :])
    # Estimates are means of nonnegative quantities.
    return np.clip(out[0].double().numpy(), 0.0, None)


def run(*, xs, ctx: dict) -> EstimatorResult:
    t0 = perf_counter()
    try:
        return EstimatorResult.success("transformer", estimate(xs, ctx), perf_counter() - t0)
    except Exception as e:
        return EstimatorResult.fail(
            "transformer", "Transformer estimator failed", f"{type(e).__name__}: {e}", perf_counter() - t0
        )
