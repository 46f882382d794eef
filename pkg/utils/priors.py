"""Prior generators: neural pushforwards, Dirichlet-process batches, grid priors and the theta_max law."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F

from schemas import DirichletProcessSpec, DiscretePrior, NeuralPriorConfig, ThetaMaxLaw

ACTIVATIONS: dict[str, Callable[[torch.Tensor], torch.Tensor]] = {
    "gelu": F.gelu,
    "relu": F.relu,
    "selu": F.selu,
    "celu": F.celu,
    "silu": F.silu,
    "tanh": torch.tanh,
    "tanhshrink": F.tanhshrink,
}


@dataclass
class NeuralComponent:
    w1: np.ndarray  # (hidden, 1)
    w2: np.ndarray  # (1, hidden)
    activation: str

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {self.activation}")

    def pushforward(self, u: np.ndarray) -> np.ndarray:
        # Sigmoid(10 * W2 sigma(W1 u)) evaluated row-wise.
        x = torch.as_tensor(np.asarray(u, dtype=np.float64).reshape(-1, 1))
        w1 = torch.as_tensor(self.w1, dtype=torch.float64)
        w2 = torch.as_tensor(self.w2, dtype=torch.float64)
        h = ACTIVATIONS[self.activation](x @ w1.T)
        return torch.sigmoid(10.0 * (h @ w2.T)).reshape(-1).numpy()


@dataclass
class NeuralPriorSpec:
    components: list[NeuralComponent]
    mixture: np.ndarray = field(default_factory=lambda: np.full(4, 0.25))

    def __post_init__(self) -> None:
        self.mixture = np.asarray(self.mixture, dtype=np.float64)
        if self.mixture.size != len(self.components):
            raise ValueError("one mixture weight per component")
        if abs(float(self.mixture.sum()) - 1.0) > 1e-9 or np.any(self.mixture < 0):
            raise ValueError("mixture weights must be a probability vector")


def sample_neural_prior(rng: np.random.Generator, cfg: NeuralPriorConfig | None = None) -> NeuralPriorSpec:
    cfg = cfg or NeuralPriorConfig()
    names = sorted(ACTIVATIONS)
    components = [
        NeuralComponent(
            w1=rng.standard_normal((cfg.hidden, 1)),
            w2=rng.standard_normal((1, cfg.hidden)),
            activation=names[int(rng.integers(len(names)))],
        )
        for _ in range(cfg.components)
    ]
    mixture = rng.dirichlet(np.ones(cfg.components))
    return NeuralPriorSpec(components=components, mixture=mixture)


def sample_theta_base_batch(spec: NeuralPriorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    n = int(n)
    if n <= 0:
        return np.zeros(0)
    which = rng.choice(len(spec.components), size=n, p=spec.mixture)
    u = rng.uniform(size=n)
    out = np.empty(n)
    for k, comp in enumerate(spec.components):
        mask = which == k
        if np.any(mask):
            out[mask] = comp.pushforward(u[mask])
    return out


def sample_dirichlet_batch(spec: DirichletProcessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Chinese-restaurant sequence with Unif[0, 1] base distribution."""
    n = int(n)
    out = np.empty(max(n, 0))
    alpha = float(spec.alpha)
    fresh_u = rng.uniform(size=n)
    coin = rng.uniform(size=n)
    pick = rng.uniform(size=n)
    for j in range(n):
        # j predecessors: fresh w.p. alpha / (alpha + j)
        if j == 0 or coin[j] < alpha / (alpha + j):
            out[j] = fresh_u[j]
        else:
            out[j] = out[int(pick[j] * j)]
    return out


def sample_theta_max_branch(
    law: ThetaMaxLaw,
    size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draws from the three-branch theta_max mixture with the branch index of each draw."""
    branch = rng.choice(3, size=int(size), p=law.weights)
    uniform = rng.uniform(0.0, law.uniform_high, size=int(size))
    expo = rng.exponential(law.exp_scale, size=int(size))
    cauchy = law.cauchy_loc + law.cauchy_scale * rng.standard_cauchy(size=int(size))
    raw = np.choose(branch, [uniform, expo, cauchy])
    return np.clip(raw, 0.0, law.cap), branch


def sample_theta_max(law: ThetaMaxLaw, rng: np.random.Generator) -> float:
    values, _ = sample_theta_max_branch(law, 1, rng)
    return float(values[0])


def multinomial_grid_prior(
    grid_size: int,
    theta_max: float,
    rng: np.random.Generator,
    *,
    concentration: float = 1.0,
) -> DiscretePrior:
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    atoms = np.linspace(0.0, float(theta_max), int(grid_size))
    weights = rng.dirichlet(np.full(int(grid_size), float(concentration)))
    return DiscretePrior.build(atoms, weights, theta_max=float(theta_max))


def discretize_samples(samples: np.ndarray, theta_max: float, grid: int = 2000) -> DiscretePrior:
    """Collapse Monte Carlo draws into equal-count quantile bins, one atom per bin mean."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    bins = np.array_split(s, min(int(grid), s.size))
    atoms = np.array([b.mean() for b in bins if b.size])
    weights = np.array([b.size for b in bins if b.size], dtype=np.float64)
    return DiscretePrior.build(np.clip(atoms, 0.0, theta_max), weights, theta_max=theta_max)


def discretize_neural_prior(
    spec: NeuralPriorSpec,
    theta_max: float,
    rng: np.random.Generator,
    *,
    draws: int = 100_000,
    grid: int = 2000,
) -> DiscretePrior:
    base = sample_theta_base_batch(spec, draws, rng)
    return discretize_samples(theta_max * base, theta_max, grid)


def sample_training_thetas(
    kind: str,
    n: int,
    theta_max: float,
    rng: np.random.Generator,
    *,
    dirichlet: DirichletProcessSpec,
    neural: NeuralPriorConfig,
) -> np.ndarray:
    """One batch of thetas from a freshly drawn prior of the given kind."""
    if kind == "neural":
        base = sample_theta_base_batch(sample_neural_prior(rng, neural), n, rng)
    elif kind == "dirichlet":
        base = sample_dirichlet_batch(dirichlet, n, rng)
    else:
        raise ValueError(f"Unknown prior kind: {kind}")
    return float(theta_max) * base
