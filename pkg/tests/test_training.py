"""Tests for training."""

from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from model.training import DivergenceError, build_model, draw_training_group, evaluate_mse, train
from schemas import ModelConfig, TrainSchedule


def _cfg() -> ModelConfig:
    return ModelConfig(layers=2, dmodel=8, heads=2, dtype="float64", seed=1)


def _schedule(**kw) -> TrainSchedule:
    base = {
        "epochs": 3,
        "batches_per_epoch": 4,
        "group_size": 2,
        "seq_len": 16,
        "lr": 0.01,
        "decay_every": 2,
        "theta_max_fixed": 10.0,
        "log_every": 1,
    }
    base.update(kw)
    return TrainSchedule(**base)


def test_draw_training_group_shapes_and_kinds():
    sched = _schedule(prior_mix={"neural": 0.0, "dirichlet": 1.0})
    xs, thetas, kinds = draw_training_group(sched, 5, np.random.default_rng(0))
    assert xs.shape == (5, 16)
    assert thetas.shape == (5, 16)
    assert kinds == ["dirichlet"] * 5
    assert thetas.max() <= 10.0
    assert xs.dtype == np.int64


def test_training_is_deterministic_for_a_seed():
    a = train(_cfg(), _schedule(), np.random.default_rng(42))
    b = train(_cfg(), _schedule(), np.random.default_rng(42))
    assert a.log == b.log
    for pa, pb in zip(a.model.parameters(), b.model.parameters()):
        assert torch.equal(pa, pb)


def test_training_log_and_step_decay():
    seen = []
    result = train(_cfg(), _schedule(), np.random.default_rng(0), progress_cb=lambda e, row: seen.append(e))
    frame = result.log_frame()
    assert list(frame.columns) == ["epoch", "mean_loss", "lr"]
    assert frame["epoch"].tolist() == [1, 2, 3]
    assert frame["lr"].tolist() == pytest.approx([0.01, 0.01, 0.009])
    assert all(math.isfinite(v) for v in frame["mean_loss"])
    assert seen == [1, 2, 3]


def test_data_parallel_matches_single_worker():
    single = train(_cfg(), _schedule(), np.random.default_rng(7))
    split = train(_cfg(), _schedule(data_parallel=2), np.random.default_rng(7))
    for ra, rb in zip(single.log, split.log):
        assert rb["mean_loss"] == pytest.approx(ra["mean_loss"], rel=1e-8)


def test_divergence_raises_with_partial_log():
    with pytest.raises(DivergenceError) as info:
        train(_cfg(), _schedule(divergence_loss=1e-12), np.random.default_rng(0))
    assert info.value.log
    assert info.value.log[-1]["epoch"] == 1


def test_evaluate_mse_of_untrained_model_is_finite():
    model = build_model(_cfg())
    xs, thetas, _ = draw_training_group(_schedule(), 3, np.random.default_rng(1))
    assert math.isfinite(evaluate_mse(model, xs, thetas))


def test_adam_steps_reduce_loss_on_a_fixed_group():
    sched = _schedule()
    model = build_model(_cfg())
    xs_np, th_np, _ = draw_training_group(sched, 4, np.random.default_rng(2))
    xs, thetas = torch.as_tensor(xs_np), torch.as_tensor(th_np, dtype=model.dtype)
    opt = torch.optim.Adam(model.parameters(), lr=sched.lr, betas=(sched.beta1, sched.beta2), eps=sched.eps)

    before = evaluate_mse(model, xs_np, th_np)
    for _ in range(100):
        opt.zero_grad(set_to_none=True)
        pred, _ = model(xs)
        loss = torch.nn.functional.mse_loss(pred, thetas)
        loss.backward()
        opt.step()
    after = evaluate_mse(model, xs_np, th_np)
    assert after < 0.8 * before
