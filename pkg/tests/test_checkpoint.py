"""Tests for checkpoint."""

from __future__ import annotations

import json

import pytest
import torch

from model.checkpoint import CheckpointError, load_params, save_params
from model.training import build_model
from schemas import ModelConfig


def _cfg(**kw) -> ModelConfig:
    return ModelConfig(layers=2, dmodel=8, heads=2, **kw)


def test_round_trip_preserves_config_and_weights(tmp_path):
    model = build_model(_cfg(attention="linear", seed=3))
    path = save_params(model, tmp_path / "m.ebtf")
    loaded = load_params(path)

    assert loaded.cfg == model.cfg
    for (name, a), (name_b, b) in zip(model.state_dict().items(), loaded.state_dict().items()):
        assert name == name_b
        assert torch.equal(a, b)
    xs = torch.tensor([0, 4, 2])
    with torch.no_grad():
        assert torch.equal(model(xs)[0], loaded(xs)[0])


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_params(tmp_path / "nope.ebtf")


def test_bad_magic(tmp_path):
    path = save_params(build_model(_cfg()), tmp_path / "m.ebtf")
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="magic"):
        load_params(path)


def test_truncated_body(tmp_path):
    path = save_params(build_model(_cfg()), tmp_path / "m.ebtf")
    path.write_bytes(path.read_bytes()[:-20])
    with pytest.raises(CheckpointError, match="truncated"):
        load_params(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "short.ebtf"
    path.write_bytes(b"EBT")
    with pytest.raises(CheckpointError, match="truncated"):
        load_params(path)


def test_trailing_bytes(tmp_path):
    path = save_params(build_model(_cfg()), tmp_path / "m.ebtf")
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(CheckpointError, match="trailing"):
        load_params(path)


def test_shape_mismatch_from_edited_manifest(tmp_path):
    path = save_params(build_model(_cfg()), tmp_path / "m.ebtf")
    raw = path.read_bytes()
    meta_len = int.from_bytes(raw[6:10], "little")
    manifest = json.loads(raw[10 : 10 + meta_len])
    manifest["tensors"][0]["shape"] = [3, 3]
    meta = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path.write_bytes(raw[:6] + len(meta).to_bytes(4, "little") + meta + raw[10 + meta_len :])
    with pytest.raises(CheckpointError, match="shape mismatch"):
        load_params(path)


def test_reloaded_softmax_model_gives_identical_batched_output(tmp_path):
    model = build_model(_cfg(attention="softmax", dtype="float64", seed=5))
    loaded = load_params(save_params(model, tmp_path / "s.ebtf"))
    xs = torch.tensor([[0, 4, 2, 9, 1], [3, 3, 0, 7, 12]])
    with torch.no_grad():
        assert torch.equal(model(xs)[0], loaded(xs)[0])
