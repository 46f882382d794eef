"""Adam training loop for the tinyformer on prior-on-prior synthetic batches."""

# model/training.py
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F

from model.tinyformer import TinyFormer
from schemas import ModelConfig, TrainSchedule
from utils.pool import map_ordered
from utils.priors import sample_theta_max, sample_training_thetas


class DivergenceError(RuntimeError):
    """Raised when the loss becomes non-finite or exceeds the divergence threshold."""

    def __init__(self, message: str, *, log: list[dict]):
        super().__init__(message)
        self.log = log


@dataclass
class TrainResult:
    model: TinyFormer
    log: list[dict] = field(default_factory=list)

    def log_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.log, columns=["epoch", "mean_loss", "lr"])


def build_model(cfg: ModelConfig) -> TinyFormer:
    torch.manual_seed(cfg.seed)
    return TinyFormer(cfg)


def draw_training_group(
    schedule: TrainSchedule,
    size: int,
    rng: np.random.Generator,
    theta_max: float | None = None,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """`size` sequences, each from its own freshly drawn prior: (xs, thetas, prior kinds)."""
    kinds = list(schedule.prior_mix)
    probs = np.array([schedule.prior_mix[k] for k in kinds])
    xs = np.empty((size, schedule.seq_len), dtype=np.int64)
    thetas = np.empty((size, schedule.seq_len))
    picked: list[str] = []
    for s in range(size):
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
        if schedule.theta_max_fixed is not None:
            tmax = schedule.theta_max_fixed
        elif theta_max is not None:
            tmax = theta_max
        else:
            tmax = sample_theta_max(schedule.theta_max_law, rng)
        thetas[s] = sample_training_thetas(
            kind, schedule.seq_len, tmax, rng, dirichlet=schedule.dirichlet, neural=schedule.neural
        )
        xs[s] = rng.poisson(thetas[s])
        picked.append(kind)
    return xs, thetas, picked


def _group_grads(model: TinyFormer, xs: torch.Tensor, thetas: torch.Tensor, workers: int):
    # Micro-batch gradients summed in fixed order; loss weights keep the sum equal to the full-batch mean.
    params = [p for p in model.parameters()]
    total = xs.shape[0]
    chunks = [(xs[i : i + math.ceil(total / workers)], thetas[i : i + math.ceil(total / workers)])
              for i in range(0, total, math.ceil(total / workers))]

    def _one(chunk):
        cx, ct = chunk
        pred, _ = model(cx)
        loss = F.mse_loss(pred, ct) * (cx.shape[0] / total)
        return float(loss.detach()), torch.autograd.grad(loss, params)

    parts = map_ordered(_one, chunks, workers=workers)
    loss = sum(p[0] for p in parts)
    grads = [sum(p[1][i] for p in parts) for i in range(len(params))]
    return loss, grads


def train(
    cfg: ModelConfig,
    schedule: TrainSchedule,
    rng: np.random.Generator,
    *,
    progress_cb: Callable[[int, dict], None] | None = None,
) -> TrainResult:
    model = build_model(cfg)
    opt = torch.optim.Adam(
        model.parameters(),
        lr=schedule.lr,
        betas=(schedule.beta1, schedule.beta2),
        eps=schedule.eps,
    )
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=schedule.decay_every, gamma=schedule.decay)
    log: list[dict] = []
    dtype = model.dtype

    for epoch in range(1, schedule.epochs + 1):
        epoch_tmax = sample_theta_max(schedule.theta_max_law, rng) if schedule.theta_max_per == "epoch" else None
        lr = opt.param_groups[0]["lr"]
        losses: list[float] = []
        remaining = schedule.batches_per_epoch
        while remaining > 0:
            size = min(schedule.group_size, remaining)
            remaining -= size
            xs_np, th_np, _ = draw_training_group(schedule, size, rng, epoch_tmax)
            xs = torch.as_tensor(xs_np)
            thetas = torch.as_tensor(th_np, dtype=dtype)

            opt.zero_grad(set_to_none=True)
            if schedule.data_parallel > 1:
                loss_value, grads = _group_grads(model, xs, thetas, schedule.data_parallel)
                for p, g in zip(model.parameters(), grads):
                    p.grad = g
            else:
                pred, _ = model(xs)
                loss = F.mse_loss(pred, thetas)
                loss.backward()
                loss_value = float(loss.detach())

            if not math.isfinite(loss_value) or loss_value > schedule.divergence_loss:
                log.append({"epoch": epoch, "mean_loss": loss_value, "lr": lr})
                raise DivergenceError(f"training diverged at epoch {epoch} (loss={loss_value:.4g})", log=log)
            opt.step()
            losses.append(loss_value * size)

        sched.step()
        row = {"epoch": epoch, "mean_loss": sum(losses) / schedule.batches_per_epoch, "lr": lr}
        log.append(row)
        if progress_cb and (epoch % schedule.log_every == 0 or epoch == schedule.epochs):
            progress_cb(epoch, row)
    return TrainResult(model=model, log=log)


def evaluate_mse(
    model: TinyFormer,
    xs: np.ndarray,
    thetas: np.ndarray,
) -> float:
    with torch.no_grad():
        pred, _ = model(torch.as_tensor(xs))
    return float(np.mean((pred.double().numpy() - thetas) ** 2))
