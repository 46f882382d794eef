"""Probes on frozen tinyformer activations: what each layer encodes, scored by R^2."""

# model/probes.py
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import logging
from typing import Callable

import numpy as np
import pandas as pd
from sklearn.metrics import r2_score
import torch
from torch import nn

from estimators.npmle import npmle_fit
from model.tinyformer import TinyFormer
from schemas import DiscretePrior, NpmleConfig, ProbeConfig
from utils.poisson import mixture_logpmf, sample_batch
from utils.priors import multinomial_grid_prior

logger = logging.getLogger("poisson_eb")

PriorSampler = Callable[[np.random.Generator], DiscretePrior]


class ProbeError(ValueError):
    """Raised when a probe cannot be fit (empty data, constant labels, bad layer)."""


@dataclass
class ProbeDataset:
    features: np.ndarray
    labels: np.ndarray
    skipped: int = 0


@dataclass
class ProbeResult:
    probe: nn.Module
    r2_train: float
    r2_holdout: float
    n_rows: int


@dataclass
class _Collected:
    acts: dict[int, list[np.ndarray]] = field(default_factory=dict)
    labels: dict[str, list[np.ndarray]] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)


def params_checksum(model: nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in model.state_dict().items():
        h.update(name.encode("utf-8"))
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def probe_labels(
    target: str,
    xs: np.ndarray,
    thetas: np.ndarray,
    prior: DiscretePrior,
    *,
    frequency_mode: str = "normalized",
    npmle_cfg: NpmleConfig | None = None,
) -> np.ndarray:
    """Per-token labels for one sequence."""
    xs = np.asarray(xs, dtype=np.int64)
    if target == "x":
        return xs.astype(np.float64)
    if target == "frequency":
        counts = np.bincount(xs)[xs].astype(np.float64)
        return counts / xs.size if frequency_mode == "normalized" else counts
    if target == "npmle_density":
        fit = npmle_fit(xs, npmle_cfg)
        return np.exp(mixture_logpmf(fit.prior, xs))
    if target == "atom_pmf":
        return prior.pmf_at(thetas)
    raise ProbeError(f"Unknown probe target: {target}")


def _collect(
    model: TinyFormer,
    prior_sampler: PriorSampler,
    cfg: ProbeConfig,
    layers: list[int],
    targets: list[str],
    rng: np.random.Generator,
) -> _Collected:
    out = _Collected(
        acts={l: [] for l in layers},
        labels={t: [] for t in targets},
        skipped={t: 0 for t in targets},
    )
    # Tokens of a sequence are kept only if every target labels them, so rows align across targets.
    for _ in range(cfg.batches):
        prior = prior_sampler(rng)
        batch = sample_batch(prior, cfg.seq_len, rng)
        try:
            per_target = {
                t: probe_labels(t, batch.xs, batch.thetas, prior, frequency_mode=cfg.frequency_mode) for t in targets
            }
        except Exception as e:
            for t in targets:
                out.skipped[t] += 1
            logger.warning("Skipping probe sequence: %s: %s", type(e).__name__, e)
            continue
        with torch.no_grad():
            _, acts = model(torch.as_tensor(batch.xs), capture=set(layers))
        for l in layers:
            out.acts[l].append(acts[l].double().numpy())
        for t in targets:
            out.labels[t].append(per_target[t])
    return out


def build_probe_dataset(
    model: TinyFormer,
    prior_sampler: PriorSampler,
    cfg: ProbeConfig,
    layer: int,
    target: str,
    rng: np.random.Generator,
) -> ProbeDataset:
    if not 1 <= layer <= model.cfg.layers:
        raise ProbeError(f"layer {layer} outside 1..{model.cfg.layers}")
    got = _collect(model, prior_sampler, cfg, [layer], [target], rng)
    if not got.acts[layer]:
        raise ProbeError("no sequences survived label construction")
    return ProbeDataset(
        features=np.concatenate(got.acts[layer]),
        labels=np.concatenate(got.labels[target]),
        skipped=got.skipped[target],
    )


def grid_prior_sampler(cfg: ProbeConfig, grid_size: int = 51) -> PriorSampler:
    """Dirichlet weights on a uniform grid over [0, theta_max]; atom_pmf labels vary across tokens."""

    def _sample(rng: np.random.Generator) -> DiscretePrior:
        return multinomial_grid_prior(grid_size, cfg.theta_max, rng)

    return _sample


def _make_probe(dmodel: int, hidden: int) -> nn.Module:
    return nn.Sequential(
        nn.LayerNorm(dmodel),
        nn.Linear(dmodel, hidden),
        nn.GELU(),
        nn.Linear(hidden, 1),
    ).double()


def train_probe(dataset: ProbeDataset, cfg: ProbeConfig, seed: int = 0) -> ProbeResult:
    """MSE-trained probe with out-of-sample R^2 on a held-out split."""
    X = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.float64)
    if X.shape[0] < 5:
        raise ProbeError("probe dataset too small")
    std = float(y.std())
    if not std > 0:
        raise ProbeError("labels have zero variance; R^2 undefined")
    z = (y - y.mean()) / std

    rng = np.random.default_rng(seed)
    order = rng.permutation(X.shape[0])
    n_hold = max(1, int(round(cfg.holdout * X.shape[0])))
    hold, fit = order[:n_hold], order[n_hold:]

    torch.manual_seed(seed)
    probe = _make_probe(X.shape[1], cfg.hidden)
    opt = torch.optim.Adam(probe.parameters(), lr=cfg.lr)
    xt = torch.as_tensor(X[fit])
    yt = torch.as_tensor(z[fit])
    for _ in range(cfg.epochs):
        opt.zero_grad(set_to_none=True)
        loss = torch.mean((probe(xt).reshape(-1) - yt) ** 2)
        loss.backward()
        opt.step()

    with torch.no_grad():
        pred_fit = probe(xt).reshape(-1).numpy()
        pred_hold = probe(torch.as_tensor(X[hold])).reshape(-1).numpy()
    r2_hold = float(r2_score(z[hold], pred_hold)) if n_hold > 1 else float("nan")
    return ProbeResult(
        probe=probe,
        r2_train=float(r2_score(z[fit], pred_fit)),
        r2_holdout=r2_hold,
        n_rows=int(X.shape[0]),
    )


def probe_depth_profile(
    model: TinyFormer,
    targets: list[str],
    prior_sampler: PriorSampler,
    cfg: ProbeConfig,
    seed: int = 0,
) -> pd.DataFrame:
    """R^2 per (layer, target); R^2 below -1 is reported as -1."""
    layers = cfg.layers or list(range(1, model.cfg.layers + 1))
    bad = [l for l in layers if not 1 <= l <= model.cfg.layers]
    if bad:
        raise ProbeError(f"layers outside 1..{model.cfg.layers}: {bad}")
    before = params_checksum(model)
    model.eval()

    got = _collect(model, prior_sampler, cfg, layers, list(targets), np.random.default_rng(seed))
    if not any(got.acts.values()) or not got.acts[layers[0]]:
        raise ProbeError("no sequences survived label construction")
    rows = []
    for layer in layers:
        features = np.concatenate(got.acts[layer])
        for target in targets:
            ds = ProbeDataset(features=features, labels=np.concatenate(got.labels[target]), skipped=got.skipped[target])
            res = train_probe(ds, cfg, seed=seed)
            rows.append(
                {
                    "layer": layer,
                    "target": target,
                    "r2_train": max(res.r2_train, -1.0),
                    "r2_holdout": max(res.r2_holdout, -1.0),
                    "n_rows": res.n_rows,
                }
            )

    if params_checksum(model) != before:
        raise ProbeError("probing modified the transformer parameters")
    return pd.DataFrame(rows, columns=["layer", "target", "r2_train", "r2_holdout", "n_rows"])
