"""Pydantic schemas and array records shared across estimators, models and orchestration."""

# schemas.py
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

EstimatorId = Literal["mle", "robbins", "robbins_clipped", "erm", "npmle", "gs", "transformer", "bayes"]
PriorFamily = Literal["worst_case", "multinomial", "neural"]
AttentionKind = Literal["softmax", "linear"]
ProbeTarget = Literal["frequency", "npmle_density", "x", "atom_pmf"]

WEIGHT_SUM_TOL = 1e-12


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Array records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretePrior:
    """Finite atomic distribution on [0, theta_max]."""

    atoms: np.ndarray
    weights: np.ndarray
    theta_max: float

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=np.float64).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "theta_max", float(self.theta_max))

        if atoms.size == 0 or atoms.size != weights.size:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        if atoms.size > 1 and np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if atoms[0] < 0 or atoms[-1] > self.theta_max:
            raise ValueError(f"atoms must lie in [0, {self.theta_max}]")

    @classmethod
    def build(
        cls,
        atoms,
        weights,
        theta_max: float | None = None,
        *,
        prune: float = 0.0,
    ) -> "DiscretePrior":
        # Sort, merge duplicate atoms, drop tiny weights and renormalize.
        a = np.asarray(atoms, dtype=np.float64).reshape(-1)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if a.size != w.size or a.size == 0:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        w = np.clip(w, 0.0, None)
        uniq, inverse = np.unique(a, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, w)
        keep = merged > prune
        if not np.any(keep):
            keep = merged == merged.max()
        uniq, merged = uniq[keep], merged[keep]
        merged = merged / merged.sum()
        tmax = float(uniq[-1]) if theta_max is None else float(theta_max)
        return cls(atoms=uniq, weights=merged, theta_max=max(tmax, float(uniq[-1])))

    @classmethod
    def point_mass(cls, c: float, theta_max: float | None = None) -> "DiscretePrior":
        return cls(atoms=np.array([float(c)]), weights=np.array([1.0]), theta_max=c if theta_max is None else theta_max)

    @property
    def size(self) -> int:
        return int(self.atoms.size)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.atoms))

    def second_moment(self) -> float:
        return float(np.dot(self.weights, self.atoms**2))

    def pmf_at(self, thetas) -> np.ndarray:
        # Weight of each queried value; zero off the support.
        q = np.asarray(thetas, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.atoms, q), 0, self.size - 1)
        hit = np.isclose(self.atoms[idx], q, rtol=0.0, atol=1e-12)
        return np.where(hit, self.weights[idx], 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.atoms, size=int(n), p=self.weights)

    def to_dict(self) -> dict:
        return {
            "theta_max": self.theta_max,
            "atoms": [float(a) for a in self.atoms],
            "weights": [float(w) for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscretePrior":
        return cls(
            atoms=np.asarray(data["atoms"], dtype=np.float64),
            weights=np.asarray(data["weights"], dtype=np.float64),
            theta_max=float(data["theta_max"]),
        )


@dataclass
class Batch:
    xs: np.ndarray
    thetas: np.ndarray
    prior_id: str = ""

    def __post_init__(self) -> None:
        self.xs = np.asarray(self.xs, dtype=np.int64).reshape(-1)
        self.thetas = np.asarray(self.thetas, dtype=np.float64).reshape(-1)
        if self.xs.shape != self.thetas.shape:
            raise ValueError("xs and thetas must have equal length")
        if np.any(self.xs < 0):
            raise ValueError("xs must be nonnegative")

    @property
    def n(self) -> int:
        return int(self.xs.size)


@dataclass
class FrequencyTable:
    """Counts N(x) for x = 0..max(xs)+1."""

    counts: np.ndarray
    n: int

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        out = np.zeros(x.shape, dtype=np.int64)
        inside = (x >= 0) & (x < self.counts.size)
        out[inside] = self.counts[x[inside]]
        return out


@dataclass
class PredictionTask:
    task_id: str
    xs: np.ndarray
    ys: np.ndarray
    n_y: float
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.xs = np.asarray(self.xs, dtype=np.int64).reshape(-1)
        self.ys = np.asarray(self.ys, dtype=np.int64).reshape(-1)
        self.n_y = float(self.n_y)
        if self.xs.shape != self.ys.shape:
            raise ValueError(f"task {self.task_id}: xs and ys differ in length")
        if not self.n_y > 0:
            raise ValueError(f"task {self.task_id}: n_y must be positive")
        if np.any(self.xs < 0) or np.any(self.ys < 0):
            raise ValueError(f"task {self.task_id}: counts must be nonnegative")


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


class EstimatorError(BaseModel):
    message: str
    detail: Optional[str] = None


class EstimatorResult(BaseModel):
    ok: bool
    estimator_id: str
    estimates: List[float] = Field(default_factory=list)
    wall_time: float = 0.0
    warnings: List[str] = Field(default_factory=list)
    error: Optional[EstimatorError] = None

    @staticmethod
    def success(
        estimator_id: str,
        estimates,
        wall_time: float,
        warnings: List[str] | None = None,
    ) -> "EstimatorResult":
        return EstimatorResult(
            ok=True,
            estimator_id=estimator_id,
            estimates=[float(v) for v in np.asarray(estimates, dtype=np.float64)],
            wall_time=float(wall_time),
            warnings=warnings or [],
        )

    @staticmethod
    def fail(
        estimator_id: str,
        message: str,
        detail: str | None = None,
        wall_time: float = 0.0,
    ) -> "EstimatorResult":
        return EstimatorResult(
            ok=False,
            estimator_id=estimator_id,
            wall_time=float(wall_time),
            error=EstimatorError(message=message, detail=detail),
        )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.estimates, dtype=np.float64)


class RegretReport(BaseModel):
    estimator_id: str
    prior_id: str
    n: int
    batches: int
    mse: float
    mmse: float
    regret: float
    std_err: float = Field(ge=0.0)
    mse_mc: float = math.nan
    failures: int = 0
    wall_time: float = 0.0

    def to_row(self) -> dict:
        return self.model_dump()


class ScoreRow(BaseModel):
    task_id: str
    estimator_id: str
    rmse_norm: float = Field(ge=0.0)
    mae_norm: float = Field(ge=0.0)
    rmse_ratio_vs_mle: float
    mae_ratio_vs_mle: float
    n_items: int = 0


class RankingRecord(BaseModel):
    order: List[str]

    @field_validator("order")
    @classmethod
    def _unique(cls, v: List[str]) -> List[str]:
        if len(set(v)) != len(v):
            raise ValueError("each estimator id may appear once per record")
        return v


# ---------------------------------------------------------------------------
# Configuration sections
# ---------------------------------------------------------------------------


class ThetaMaxLaw(_Strict):
    weights: List[float] = Field(default_factory=lambda: [0.75, 0.125, 0.125])
    uniform_high: float = Field(200.0, gt=0)
    exp_scale: float = Field(50.0, gt=0)
    cauchy_loc: float = 50.0
    cauchy_scale: float = Field(10.0, gt=0)
    cap: float = Field(500.0, gt=0, le=500.0)

    @field_validator("weights")
    @classmethod
    def _weights(cls, v: List[float]) -> List[float]:
        if len(v) != 3 or any(w < 0 for w in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError("theta_max law needs 3 nonnegative weights summing to 1")
        return v


class DirichletProcessSpec(_Strict):
    alpha: float = Field(50.0, gt=0)


class NeuralPriorConfig(_Strict):
    hidden: int = Field(32, ge=1)
    components: int = Field(4, ge=1)
    discretize_draws: int = Field(100_000, ge=100)
    discretize_grid: int = Field(2000, ge=2)


class ModelConfig(_Strict):
    layers: int = Field(6, ge=2)
    dmodel: int = Field(32, ge=2)
    heads: int = Field(4, ge=1)
    attention: AttentionKind = "softmax"
    ff_width: Optional[int] = Field(None, ge=1)
    dtype: Literal["float32", "float64"] = "float32"
    x_scale: float = Field(64.0, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _shape(self) -> "ModelConfig":
        if self.layers % 2:
            raise ValueError("layers must be even (two weight groups)")
        if self.dmodel % self.heads:
            raise ValueError("dmodel must be divisible by heads")
        return self

    @property
    def ff(self) -> int:
        return self.ff_width or 4 * self.dmodel


class TrainSchedule(_Strict):
    epochs: int = Field(2000, ge=1)
    batches_per_epoch: int = Field(192, ge=1)
    group_size: int = Field(16, ge=1)
    seq_len: int = Field(512, ge=1)
    lr: float = Field(0.02, gt=0)
    decay: float = Field(0.9, gt=0, le=1)
    decay_every: int = Field(300, ge=1)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    prior_mix: Dict[str, float] = Field(default_factory=lambda: {"neural": 0.5, "dirichlet": 0.5})
    theta_max_law: ThetaMaxLaw = Field(default_factory=ThetaMaxLaw)
    theta_max_fixed: Optional[float] = Field(None, gt=0, le=500)
    theta_max_per: Literal["batch", "epoch"] = "batch"
    dirichlet: DirichletProcessSpec = Field(default_factory=DirichletProcessSpec)
    neural: NeuralPriorConfig = Field(default_factory=NeuralPriorConfig)
    data_parallel: int = Field(1, ge=1)
    divergence_loss: float = Field(1e6, gt=0)
    log_every: int = Field(50, ge=1)

    @field_validator("prior_mix")
    @classmethod
    def _mix(cls, v: Dict[str, float]) -> Dict[str, float]:
        unknown = set(v) - {"neural", "dirichlet"}
        if unknown:
            raise ValueError(f"unknown prior kinds: {sorted(unknown)}")
        if any(p < 0 for p in v.values()) or abs(sum(v.values()) - 1.0) > 1e-9:
            raise ValueError("prior mixture weights must be nonnegative and sum to 1")
        return v


class NpmleConfig(_Strict):
    theta_max: Optional[float] = Field(None, gt=0)
    grid_size: Optional[int] = Field(None, ge=2)
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(5000, ge=1)
    refine: bool = False
    refine_rounds: int = Field(5, ge=1)


class RobbinsNetSpec(_Strict):
    d: int = Field(30, ge=1)
    M: float = Field(50.0, gt=0)
    D: Optional[float] = Field(None, ge=100)

    @property
    def logit_constant(self) -> float:
        return float(self.D) if self.D is not None else float(max(100, (self.d + 1) ** 2))


class CertifyConfig(_Strict):
    d: int = Field(30, ge=1)
    M: float = Field(50.0, gt=0)
    D: List[float] = Field(default_factory=lambda: [100.0])
    batches: int = Field(1000, ge=1)
    max_n: int = Field(512, ge=1)
    tol: float = Field(1e-6, gt=0)
    linear_tol: float = Field(1e-9, gt=0)


class ProbeConfig(_Strict):
    targets: List[ProbeTarget] = Field(default_factory=lambda: ["x", "frequency", "npmle_density", "atom_pmf"])
    layers: Optional[List[int]] = None
    hidden: int = Field(32, ge=1)
    epochs: int = Field(300, ge=1)
    lr: float = Field(1e-2, gt=0)
    batches: int = Field(64, ge=1)
    seq_len: int = Field(128, ge=1)
    theta_max: float = Field(50.0, gt=0, le=500)
    frequency_mode: Literal["normalized", "raw"] = "normalized"
    holdout: float = Field(0.2, gt=0, lt=1)


class ExperimentSpec(_Strict):
    estimators: List[str] = Field(default_factory=lambda: ["mle", "robbins", "erm", "npmle", "gs"])
    families: List[PriorFamily] = Field(default_factory=lambda: ["worst_case", "multinomial", "neural"])
    theta_max: float = Field(50.0, gt=0, le=500)
    lengths: List[int] = Field(default_factory=lambda: [128, 256, 512, 1024, 2048])
    priors_per_cell: int = Field(20, ge=1)
    batches: int = Field(100, ge=1)
    grid_size: int = Field(51, ge=1)
    dirichlet_concentration: float = Field(1.0, gt=0)
    batch_caps: Dict[str, int] = Field(default_factory=dict)
    worst_case_resolution: float = Field(0.05, gt=0)
    worst_case_tol: float = Field(1e-4, gt=0)
    anchor: str = "mle"
    ablation: bool = False

    @field_validator("lengths")
    @classmethod
    def _lengths(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("lengths must be positive")
        return v


class TimingConfig(_Strict):
    estimators: List[str] = Field(default_factory=lambda: ["mle", "robbins", "npmle", "transformer"])
    lengths: List[int] = Field(default_factory=lambda: [256, 512, 1024, 2048, 4096])
    batches: int = Field(8, ge=1)
    repeats: int = Field(5, ge=1)
    timeout_s: float = Field(600.0, gt=0)
    theta_max: float = Field(50.0, gt=0, le=500)


class RealDataConfig(_Strict):
    dataset: Optional[Literal["nhl", "mlb", "wordfreq"]] = None
    path: Optional[str] = None
    position: Literal["all", "defender", "center", "winger"] = "all"
    split: Literal["calendar", "median_event"] = "calendar"
    head_tokens: int = Field(2000, ge=1)
    estimators: List[str] = Field(default_factory=lambda: ["mle", "robbins", "erm", "npmle", "gs"])
    theta_max: Optional[float] = Field(None, gt=0)


class RunConfig(_Strict):
    subcommand: str
    config_path: Optional[str] = None
    seed: int = 0
    output_dir: str = "outputs"
    estimators: List[str] = Field(default_factory=list)
    checkpoints: List[str] = Field(default_factory=list)
