"""Utility helpers for config files: YAML in, validated specs out."""

# utils/config.py
from __future__ import annotations

from dataclasses import dataclass
import os
from pathlib import Path
from typing import Literal, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
import yaml

from estimators import ESTIMATOR_IDS
from presets import PRESETS, resolve_preset_cfg
from schemas import (
    CertifyConfig,
    ExperimentSpec,
    ModelConfig,
    NpmleConfig,
    ProbeConfig,
    RealDataConfig,
    TimingConfig,
    TrainSchedule,
)

ESTIMATOR_SECTIONS = ("experiment", "timing", "real")


class ConfigError(ValueError):
    """Raised for malformed config: bad YAML, unknown keys, type or range violations."""

    def __init__(self, message: str, *, key: str | None = None):
        super().__init__(message)
        self.key = key


class ConfigNotFoundError(FileNotFoundError):
    pass


class ConfigFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = 1
    preset: Optional[str] = None
    seed: int = 0
    output_dir: Optional[str] = None
    estimators: Optional[List[str]] = None
    checkpoint: Optional[str] = None
    model: ModelConfig = Field(default_factory=ModelConfig)
    schedule: TrainSchedule = Field(default_factory=TrainSchedule)
    experiment: ExperimentSpec = Field(default_factory=ExperimentSpec)
    timing: TimingConfig = Field(default_factory=TimingConfig)
    certify: CertifyConfig = Field(default_factory=CertifyConfig)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    real: RealDataConfig = Field(default_factory=RealDataConfig)
    npmle: NpmleConfig = Field(default_factory=NpmleConfig)

    @model_validator(mode="after")
    def _propagate_estimators(self) -> "ConfigFile":
        # A top-level estimator list applies to every section that takes one.
        if self.estimators is not None:
            for section in ESTIMATOR_SECTIONS:
                getattr(self, section).estimators = list(self.estimators)
        return self


def _dotted(loc) -> str:
    return ".".join(str(part) for part in loc)


def _check_estimators(cfg: ConfigFile) -> None:
    for section in ESTIMATOR_SECTIONS:
        unknown = [e for e in getattr(cfg, section).estimators if e not in ESTIMATOR_IDS]
        if unknown:
            raise ConfigError(f"unknown estimator(s) {unknown}", key=f"{section}.estimators")
    caps = [e for e in cfg.experiment.batch_caps if e not in ESTIMATOR_IDS]
    if caps:
        raise ConfigError(f"batch cap for unknown estimator(s) {caps}", key="experiment.batch_caps")


def config_from_dict(data: dict | None) -> ConfigFile:
    data = dict(data or {})
    preset = data.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}", key="preset")
        data = resolve_preset_cfg(preset, data)
    try:
        cfg = ConfigFile.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = _dotted(first.get("loc", ()))
        raise ConfigError(f"{key or 'config'}: {first.get('msg', 'invalid value')}", key=key or None) from e
    _check_estimators(cfg)
    return cfg


def config_parse_text(text: str) -> ConfigFile:
    try:
        data = yaml.safe_load(text or "")
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    return config_from_dict(data)


def config_parse(path: str | Path) -> ConfigFile:
    """Parse and validate a versioned YAML config; an empty file yields all defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFoundError(f"config file not found: {path}")
    return config_parse_text(path.read_text(encoding="utf-8"))


def config_serialize(cfg: ConfigFile) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True, default_flow_style=False)


def apply_overrides(
    cfg: ConfigFile,
    *,
    seed: int | None = None,
    output_dir: str | None = None,
    estimators: list[str] | None = None,
    checkpoint: str | None = None,
) -> ConfigFile:
    """Flags win over file keys; the result is revalidated."""
    data = cfg.model_dump(mode="json")
    data["preset"] = None
    if seed is not None:
        data["seed"] = int(seed)
    if output_dir:
        data["output_dir"] = output_dir
    if estimators:
        data["estimators"] = list(estimators)
    if checkpoint:
        data["checkpoint"] = checkpoint
    out = config_from_dict(data)
    return out.model_copy(update={"preset": cfg.preset})


@dataclass
class RuntimeSettings:
    cache_dir: str
    output_dir: str
    threads: int
    deterministic: bool
    log_level: str


def runtime_settings() -> RuntimeSettings:
    # Read after load_dotenv so .env values are visible.
    try:
        threads = max(1, int(os.getenv("EB_THREADS", "1")))
    except ValueError:
        threads = 1
    return RuntimeSettings(
        cache_dir=os.getenv("EB_CACHE_DIR", ".cache/poisson_eb"),
        output_dir=os.getenv("EB_OUTPUT_DIR", "outputs"),
        threads=threads,
        deterministic=os.getenv("EB_DETERMINISTIC", "1").strip().lower() in {"1", "true", "yes", "on"},
        log_level=os.getenv("EB_LOG_LEVEL", "INFO").upper(),
    )
