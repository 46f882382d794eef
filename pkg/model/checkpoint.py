"""Self-describing binary checkpoints for tinyformer parameters."""

# model/checkpoint.py
from __future__ import annotations

import json
from pathlib import Path
import struct

import numpy as np
import torch

from model.tinyformer import TinyFormer
from schemas import ModelConfig

MAGIC = b"EBTF"
VERSION = 1
_HEADER = struct.Struct("<4sHI")  # magic, version, config JSON length


class CheckpointError(ValueError):
    """Raised for unreadable, truncated or mismatched checkpoint files."""


def save_params(model: TinyFormer, path: str | Path) -> Path:
    """Write magic, version, config JSON, then float64 tensors in state_dict order."""
    state = model.state_dict()
    manifest = {
        "config": model.cfg.model_dump(mode="json"),
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in state.items()],
    }
    meta = json.dumps(manifest, sort_keys=True).encode("utf-8")
    body = b"".join(v.detach().cpu().to(torch.float64).contiguous().numpy().astype("<f8").tobytes() for v in state.values())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(_HEADER.pack(MAGIC, VERSION, len(meta)) + meta + body)
    tmp.replace(path)
    return path


def load_params(path: str | Path) -> TinyFormer:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError("checkpoint truncated before header")
    magic, version, meta_len = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError("not a tinyformer checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        manifest = json.loads(raw[_HEADER.size : _HEADER.size + meta_len].decode("utf-8"))
        cfg = ModelConfig(**manifest["config"])
        entries = manifest["tensors"]
    except Exception as e:
        raise CheckpointError(f"corrupted checkpoint header: {type(e).__name__}: {e}") from e

    model = TinyFormer(cfg)
    expected = model.state_dict()
    names = [e.get("name") for e in entries]
    if names != list(expected):
        raise CheckpointError("shape mismatch: tensor names differ from the model layout")

    offset = _HEADER.size + meta_len
    loaded = {}
    for entry in entries:
        name, shape = entry["name"], tuple(entry["shape"])
        if shape != tuple(expected[name].shape):
            raise CheckpointError(f"shape mismatch for {name}: {shape} vs {tuple(expected[name].shape)}")
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise CheckpointError(f"checkpoint truncated inside {name}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        loaded[name] = torch.from_numpy(arr.copy()).to(expected[name].dtype)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError("trailing bytes after last tensor")
    model.load_state_dict(loaded)
    return model
