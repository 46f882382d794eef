"""Miniature encoder-only transformer with two weight groups and softmax or linear attention."""

# model/tinyformer.py
from __future__ import annotations

import math

import torch
from torch import nn
import torch.nn.functional as F

from schemas import ModelConfig


class NonFiniteActivationError(RuntimeError):
    def __init__(self, message: str, *, layer: int):
        super().__init__(message)
        self.layer = int(layer)


class NonFiniteGradientError(RuntimeError):
    def __init__(self, message: str, *, path: str):
        super().__init__(message)
        self.path = path


def _dtype(cfg: ModelConfig) -> torch.dtype:
    return torch.float64 if cfg.dtype == "float64" else torch.float32


class Attention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.heads = cfg.heads
        self.head_dim = cfg.dmodel // cfg.heads
        self.kind = cfg.attention
        self.q = nn.Linear(cfg.dmodel, cfg.dmodel)
        self.k = nn.Linear(cfg.dmodel, cfg.dmodel)
        self.v = nn.Linear(cfg.dmodel, cfg.dmodel)
        self.out = nn.Linear(cfg.dmodel, cfg.dmodel)

    def _split(self, t: torch.Tensor) -> torch.Tensor:
        b, n, _ = t.shape
        return t.view(b, n, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        b, n, d = h.shape
        q, k, v = self._split(self.q(h)), self._split(self.k(h)), self._split(self.v(h))
        if self.kind == "softmax":
            scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
            z = torch.softmax(scores, dim=-1) @ v
        else:
            # (1/n) q (k^T v): no softmax, no row normalizer, O(n) in sequence length.
            z = q @ (k.transpose(-2, -1) @ v) / n
        return self.out(z.transpose(1, 2).reshape(b, n, d))


class Block(nn.Module):
    """Pre-norm block: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.dmodel)
        self.attn = Attention(cfg)
        self.ln2 = nn.LayerNorm(cfg.dmodel)
        self.ff = nn.Sequential(nn.Linear(cfg.dmodel, cfg.ff), nn.GELU(), nn.Linear(cfg.ff, cfg.dmodel))

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        h = h + self.attn(self.ln1(h))
        return h + self.ff(self.ln2(h))


class TinyFormer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Linear(2, cfg.dmodel)
        # groups[0] serves layers 1..N/2, groups[1] serves layers N/2+1..N.
        self.groups = nn.ModuleList([Block(cfg), Block(cfg)])
        self.ln_f = nn.LayerNorm(cfg.dmodel)
        self.decoder = nn.Linear(cfg.dmodel, 1)
        self.to(_dtype(cfg))

    @property
    def dtype(self) -> torch.dtype:
        return self.decoder.weight.dtype

    def block_for(self, layer: int) -> Block:
        """Shared block used at 1-based layer index `layer`."""
        return self.groups[0 if layer <= self.cfg.layers // 2 else 1]

    def features(self, xs: torch.Tensor) -> torch.Tensor:
        x = xs.to(self.dtype)
        return torch.stack([x / self.cfg.x_scale, torch.log1p(x)], dim=-1)

    def forward(
        self,
        xs: torch.Tensor,
        capture: set[int] | None = None,
    ) -> tuple[torch.Tensor, dict[int, torch.Tensor] | None]:
        """Per-position estimates for xs of shape (n,) or (batch, n); optional post-block activations."""
        squeeze = xs.dim() == 1
        if squeeze:
            xs = xs[None, :]
        h = self.embed(self.features(xs))
        acts: dict[int, torch.Tensor] | None = {} if capture else None
        for layer in range(1, self.cfg.layers + 1):
            h = self.block_for(layer)(h)
            if not torch.isfinite(h).all():
                raise NonFiniteActivationError(f"non-finite activation at layer {layer}", layer=layer)
            if acts is not None and layer in capture:
                acts[layer] = h.detach()
        out = self.decoder(self.ln_f(h)).squeeze(-1)
        if squeeze:
            out = out[0]
            if acts is not None:
                acts = {k: v[0] for k, v in acts.items()}
        return out, acts


def reference_linear_forward(model: TinyFormer, xs: torch.Tensor) -> torch.Tensor:
    """Straight-line re-computation of the linear-attention model, one position at a time."""
    cfg = model.cfg
    n = xs.shape[0]
    dh = cfg.dmodel // cfg.heads
    h = model.embed(model.features(xs))
    for layer in range(1, cfg.layers + 1):
        blk = model.block_for(layer)
        a = blk.ln1(h)
        q, k, v = blk.attn.q(a), blk.attn.k(a), blk.attn.v(a)
        rows = []
        for i in range(n):
            heads = []
            for hd in range(cfg.heads):
                sl = slice(hd * dh, (hd + 1) * dh)
                acc = torch.zeros(dh, dtype=h.dtype)
                for j in range(n):
                    acc = acc + torch.dot(q[i, sl], k[j, sl]) * v[j, sl]
                heads.append(acc / n)
            rows.append(torch.cat(heads))
        h = h + blk.attn.out(torch.stack(rows))
        h = h + blk.ff(blk.ln2(h))
    return model.decoder(model.ln_f(h)).squeeze(-1)


def loss_and_grad(model: TinyFormer, xs: torch.Tensor, thetas: torch.Tensor) -> tuple[float, dict[str, torch.Tensor]]:
    """Mean squared error over positions and its gradient for every named parameter."""
    pred, _ = model(xs)
    loss = F.mse_loss(pred, thetas.to(pred.dtype))
    names, params = zip(*[(n, p) for n, p in model.named_parameters()])
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    out: dict[str, torch.Tensor] = {}
    for name, p, g in zip(names, params, grads):
        g = torch.zeros_like(p) if g is None else g
        if not torch.isfinite(g).all():
            raise NonFiniteGradientError(f"non-finite gradient at {name}", path=name)
        out[name] = g
    return float(loss.detach()), out
