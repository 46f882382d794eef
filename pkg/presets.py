"""Experiment preset catalog: named bases that config files and flags override."""

from __future__ import annotations

from copy import deepcopy

PRESETS = {
    "desk": {
        "display_name": "Desk-scale reproduction",
        "model": {"layers": 6, "dmodel": 32, "heads": 4, "attention": "softmax"},
        "schedule": {"epochs": 200, "batches_per_epoch": 192, "seq_len": 128, "lr": 0.02, "decay_every": 30},
        "experiment": {
            "estimators": ["mle", "robbins", "erm", "npmle", "gs"],
            "families": ["worst_case", "multinomial", "neural"],
            "lengths": [128, 256, 512],
            "priors_per_cell": 8,
            "batches": 16,
            "batch_caps": {"npmle": 8},
        },
        "timing": {"lengths": [256, 512, 1024, 2048, 4096], "batches": 4, "repeats": 5},
        "probe": {"batches": 32, "epochs": 200},
    },
    "full": {
        "display_name": "Full-length sweep",
        "model": {"layers": 24, "dmodel": 32, "heads": 4, "attention": "softmax"},
        "schedule": {"epochs": 2000, "batches_per_epoch": 192, "seq_len": 512, "lr": 0.02, "decay_every": 300},
        "experiment": {
            "estimators": ["mle", "robbins", "erm", "npmle", "gs", "transformer"],
            "families": ["worst_case", "multinomial", "neural"],
            "lengths": [128, 256, 512, 1024, 2048],
            "priors_per_cell": 100,
            "batches": 100,
            "batch_caps": {"npmle": 192},
        },
        "timing": {"lengths": [256, 512, 1024, 2048, 4096], "batches": 192, "repeats": 5},
    },
    "mixture_ablation": {
        "display_name": "Neural vs Dirichlet vs mixed training priors",
        "model": {"layers": 6, "dmodel": 32, "heads": 4, "attention": "softmax"},
        "schedule": {"epochs": 100, "batches_per_epoch": 192, "seq_len": 128, "decay_every": 30},
        "experiment": {"estimators": ["mle"], "families": ["neural"], "lengths": [512], "batches": 64, "ablation": True},
    },
    "fixed_theta_max": {
        "display_name": "Training with a known theta_max of 50",
        "model": {"layers": 6, "dmodel": 32, "heads": 4, "attention": "softmax"},
        "schedule": {"epochs": 200, "batches_per_epoch": 192, "seq_len": 128, "decay_every": 30, "theta_max_fixed": 50.0},
        "experiment": {
            "estimators": ["mle", "robbins", "erm", "npmle", "gs", "transformer"],
            "families": ["neural", "multinomial"],
            "lengths": [128, 256, 512],
            "priors_per_cell": 8,
            "batches": 16,
        },
    },
}

DEFAULT_PRESET = "desk"


def get_preset(preset_key: str) -> dict:
    if preset_key not in PRESETS:
        raise KeyError(f"Unknown preset: {preset_key}")
    return PRESETS[preset_key]


def _merge(base: dict, overrides: dict) -> dict:
    out = deepcopy(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = deepcopy(value)
    return out


def resolve_preset_cfg(preset_key: str | None, overrides: dict | None = None) -> dict:
    """Preset sections with file keys layered on top; display metadata stripped."""
    base = deepcopy(get_preset(preset_key or DEFAULT_PRESET))
    base.pop("display_name", None)
    return _merge(base, overrides or {})
