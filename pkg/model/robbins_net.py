"""Hand-built attention networks that compute the clipped Robbins estimator."""

# model/robbins_net.py
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import torch
from torch import nn

from schemas import RobbinsNetSpec


@dataclass(frozen=True)
class RobbinsNetWeights:
    w_q: torch.Tensor
    w_k: torch.Tensor
    w_v: torch.Tensor


def build_robbins_net(spec: RobbinsNetSpec) -> RobbinsNetWeights:
    """W_Q = I, W_K upper bidiagonal (D; D + sqrt(d+1) log i), W_V = diag(1, ..., 1, 0)."""
    width = spec.d + 1
    D = spec.logit_constant
    w_k = torch.zeros(width, width, dtype=torch.float64)
    idx = torch.arange(width)
    w_k[idx, idx] = D
    i = torch.arange(1, width, dtype=torch.float64)  # 1-based row index of the superdiagonal
    w_k[idx[:-1], idx[1:]] = D + math.sqrt(width) * torch.log(i)
    w_v = torch.eye(width, dtype=torch.float64)
    w_v[-1, -1] = 0.0
    return RobbinsNetWeights(w_q=torch.eye(width, dtype=torch.float64), w_k=w_k, w_v=w_v)


def embed_one_hot(xs, d: int) -> torch.Tensor:
    """Row e_{X+1} for X <= d, zero row otherwise."""
    x = torch.as_tensor(np.asarray(xs, dtype=np.int64))
    y = torch.zeros(x.numel(), d + 1, dtype=torch.float64)
    ok = x <= d
    y[torch.nonzero(ok).reshape(-1), x[ok]] = 1.0
    return y


def embed_with_overflow(xs, d: int) -> torch.Tensor:
    """Row e_{X+1} for X <= d, overflow bucket e_{d+2} otherwise."""
    x = torch.as_tensor(np.asarray(xs, dtype=np.int64))
    idx = torch.where(x <= d, x, torch.full_like(x, d + 1))
    y = torch.zeros(x.numel(), d + 2, dtype=torch.float64)
    y[torch.arange(x.numel()), idx] = 1.0
    return y


def _decode(y: torch.Tensor, z: torch.Tensor, M: float) -> np.ndarray:
    # Z' = ReLU(Y + Z - 1); Z1 = row sum; min(1/Z1 - 1, M) with 1/0 = +inf.
    z1 = torch.relu(y + z - 1.0).sum(dim=1)
    inv = torch.where(z1 > 0, 1.0 / torch.where(z1 > 0, z1, torch.ones_like(z1)) - 1.0, torch.full_like(z1, math.inf))
    return torch.clamp(inv, max=M).numpy()


def robbins_net_forward(spec: RobbinsNetSpec, xs, weights: RobbinsNetWeights | None = None) -> np.ndarray:
    """Softmax attention with logits W_K[X_i+1, X_j+1] / sqrt(d_k)."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        raise ValueError("robbins_net_forward needs a nonempty sequence")
    w = weights or build_robbins_net(spec)
    y = embed_one_hot(xs, spec.d)
    q = y @ w.w_q
    k = y @ w.w_k.T
    scores = q @ k.T / math.sqrt(spec.d + 1)
    z = torch.softmax(scores, dim=-1) @ (y @ w.w_v)
    return _decode(y, z, spec.M)


def build_linear_robbins_net(spec: RobbinsNetSpec) -> RobbinsNetWeights:
    """Width d+2: W_K has unit diagonal and W_K[i, i-1] = i-1; W_V keeps coordinates 1..d."""
    width = spec.d + 2
    w_k = torch.eye(width, dtype=torch.float64)
    rows = torch.arange(1, width)
    w_k[rows, rows - 1] = rows.to(torch.float64)  # 0-based: row r holds value r, i.e. X of that slot
    w_v = torch.zeros(width, width, dtype=torch.float64)
    w_v[: spec.d, : spec.d] = torch.eye(spec.d, dtype=torch.float64)
    return RobbinsNetWeights(w_q=torch.eye(width, dtype=torch.float64), w_k=w_k, w_v=w_v)


def robbins_net_linear_forward(spec: RobbinsNetSpec, xs, weights: RobbinsNetWeights | None = None) -> np.ndarray:
    """Normalized linear attention, computed as Q (K^T V) / Q (K^T 1)."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    if xs.size == 0:
        raise ValueError("robbins_net_linear_forward needs a nonempty sequence")
    w = weights or build_linear_robbins_net(spec)
    y = embed_with_overflow(xs, spec.d)
    q = y @ w.w_q
    k = y @ w.w_k  # K_j = e_{X_j+1} + X_j e_{X_j}
    v = y @ w.w_v
    n = xs.size
    num = q @ (k.T @ v) / n
    den = q @ k.sum(dim=0, keepdim=True).T / n
    z = num / den
    return _decode(y, z, spec.M)


def leakage_bound(spec: RobbinsNetSpec, xs) -> np.ndarray:
    """Per-position bound L e^{-D/sqrt(d+1)} / N(x) on the softmax network's error."""
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    counts = np.bincount(xs, minlength=int(xs.max()) + 2)
    own = counts[xs]
    nxt = counts[xs + 1]
    others = xs.size - own - np.where(xs + 1 <= spec.d, nxt, 0)
    bound = others * math.exp(-spec.logit_constant / math.sqrt(spec.d + 1)) / own
    return np.where(xs < spec.d, bound, 0.0)


class DecoderMLP(nn.Module):
    """Two-layer ReLU network g(z) = M + sum_i c_i ReLU(z - t_i)."""

    def __init__(self, knots: np.ndarray, coeffs: np.ndarray, M: float):
        super().__init__()
        k = knots.size
        self.hidden = nn.Linear(1, k, dtype=torch.float64)
        self.out = nn.Linear(k, 1, dtype=torch.float64)
        with torch.no_grad():
            self.hidden.weight.copy_(torch.ones(k, 1, dtype=torch.float64))
            self.hidden.bias.copy_(torch.as_tensor(-knots, dtype=torch.float64))
            self.out.weight.copy_(torch.as_tensor(coeffs, dtype=torch.float64)[None, :])
            self.out.bias.fill_(float(M))
        self.requires_grad_(False)

    @property
    def hidden_units(self) -> int:
        return int(self.hidden.out_features)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.out(torch.relu(self.hidden(z.reshape(-1, 1)))).reshape(-1)


def clipped_reciprocal(z, M: float) -> np.ndarray:
    """min(1/z - 1, M) on [0, 1], with the value M at z = 0."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.minimum(np.where(z > 0, 1.0 / np.where(z > 0, z, 1.0) - 1.0, np.inf), M)


def decoder_mlp_from_budget(M: float, pieces: int) -> DecoderMLP:
    """Piecewise-linear interpolant of min(1/z - 1, M) on [1/(1+M), 1] with `pieces` even segments."""
    a = 1.0 / (1.0 + M)
    knots = np.linspace(a, 1.0, int(pieces) + 1)
    vals = 1.0 / knots - 1.0
    slopes = np.diff(vals) / np.diff(knots)
    coeffs = np.concatenate([[slopes[0]], np.diff(slopes)])
    return DecoderMLP(knots[:-1], coeffs, M)


def decoder_mlp_approx(M: float, eps: float) -> DecoderMLP:
    """ReLU approximant of min(1/z - 1, M) with sup error <= eps on [0, 1]."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = 1.0 / (1.0 + M)
    # Chord error on a segment of width h is at most h^2 (1+M)^3 / 4.
    need = max(
        math.ceil((1.0 - a) * (1.0 + M) ** 2 / (2.0 * eps)),
        math.ceil((1.0 - a) * math.sqrt((1.0 + M) ** 3 / (4.0 * eps))),
    )
    # Powers of two keep successive grids nested, so error only shrinks as the budget grows.
    pieces = 1 << max(0, (need - 1).bit_length())
    return decoder_mlp_from_budget(M, pieces)


def decoder_sup_error(mlp: DecoderMLP, M: float, points: int = 100_000) -> float:
    z = np.linspace(0.0, 1.0, points)
    with torch.no_grad():
        approx = mlp(torch.as_tensor(z)).numpy()
    return float(np.max(np.abs(approx - clipped_reciprocal(z, M))))
