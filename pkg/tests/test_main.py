"""Tests for main."""

from __future__ import annotations

import json

import pandas as pd
import pytest

import main
from utils.state import read_state


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("EB_DETERMINISTIC", "1")
    monkeypatch.setenv("EB_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("EB_OUTPUT_DIR", str(tmp_path / "outputs"))


def _config(tmp_path, text: str, name: str = "cfg.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


TINY = """
version: 1
seed: 3
model: {layers: 2, dmodel: 8, heads: 2}
schedule: {epochs: 2, batches_per_epoch: 2, group_size: 2, seq_len: 8, theta_max_fixed: 10.0, log_every: 1}
experiment:
  estimators: [mle, robbins]
  families: [multinomial]
  lengths: [10]
  priors_per_cell: 2
  batches: 2
  theta_max: 10.0
  grid_size: 11
probe: {targets: [x, frequency], batches: 3, seq_len: 16, epochs: 5, hidden: 4, theta_max: 10.0}
"""


def test_usage_errors_exit_2():
    assert main.run([]) == main.EXIT_USAGE
    assert main.run(["bogus"]) == main.EXIT_USAGE
    assert main.run(["eval"]) == main.EXIT_USAGE
    assert main.run(["eval", "synthetic", "--estimators", "mle,bogus"]) == main.EXIT_USAGE


def test_help_exits_0(capsys):
    assert main.run(["--help"]) == 0
    assert "certify-robbins" in capsys.readouterr().out


def test_missing_config_exits_3(tmp_path):
    assert main.run(["eval", "synthetic", "--config", str(tmp_path / "absent.yaml")]) == main.EXIT_CONFIG_NOT_FOUND


def test_malformed_config_exits_4(tmp_path):
    cfg = _config(tmp_path, "schedule:\n  lr: -1\n")
    assert main.run(["train", "--config", cfg]) == main.EXIT_CONFIG_INVALID


def test_certify_small_batches_passes(tmp_path):
    out = tmp_path / "cert"
    code = main.run(["certify-robbins", "--d", "4", "--M", "10", "--batches", "10", "--out", str(out)])
    assert code == main.EXIT_OK
    report = json.loads((out / "certify.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["d"] == 4
    assert {row["pass_reason"] for row in report["rows"]} <= {"within_tol", "within_leakage_bound"}
    table = pd.read_csv(out / "certify.csv")
    assert table["variant"].tolist() == ["softmax", "linear"]
    state = read_state(out)
    assert state.status == "done"
    assert state.exit_code == 0


def test_probe_without_checkpoint_exits_5(tmp_path):
    out = tmp_path / "probe"
    assert main.run(["probe", "--out", str(out)]) == main.EXIT_CHECKPOINT
    state = read_state(out)
    assert state.status == "failed"
    assert state.exit_code == main.EXIT_CHECKPOINT
    assert "CheckpointError" in state.error


def test_real_eval_without_dataset_exits_6(tmp_path):
    assert main.run(["eval", "real", "--out", str(tmp_path / "real")]) == main.EXIT_DATASET


def test_eval_synthetic_writes_identical_tables_on_rerun(tmp_path):
    cfg = _config(tmp_path, TINY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main.run(["eval", "synthetic", "--config", cfg, "--out", str(a)]) == main.EXIT_OK
    assert main.run(["eval", "synthetic", "--config", cfg, "--out", str(b)]) == main.EXIT_OK
    for name in ("regret.csv", "ttest.csv", "pl.csv", "losses.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "done"
    assert manifest["seed"] == 3
    assert manifest["subcommand"] == "eval synthetic"
    assert "numpy" in manifest["versions"]


def test_seed_flag_overrides_file(tmp_path):
    cfg = _config(tmp_path, TINY)
    out = tmp_path / "s"
    assert main.run(["eval", "synthetic", "--config", cfg, "--seed", "11", "--out", str(out)]) == main.EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 11


def test_train_then_probe(tmp_path):
    cfg = _config(tmp_path, TINY)
    run_a = tmp_path / "train"
    assert main.run(["train", "--config", cfg, "--out", str(run_a)]) == main.EXIT_OK
    ckpt = run_a / "model.ebtf"
    assert ckpt.exists()
    log = pd.read_csv(run_a / "train_log.csv")
    assert log["epoch"].tolist() == [1, 2]

    run_b = tmp_path / "probe"
    assert main.run(["probe", "--config", cfg, "--checkpoint", str(ckpt), "--out", str(run_b)]) == main.EXIT_OK
    probes = pd.read_csv(run_b / "probes.csv")
    assert set(probes["target"]) == {"x", "frequency"}
    assert set(probes["layer"]) == {1, 2}


def test_corrupt_checkpoint_exits_5(tmp_path):
    bad = tmp_path / "bad.ebtf"
    bad.write_bytes(b"nope")
    cfg = _config(tmp_path, TINY)
    code = main.run(["probe", "--config", cfg, "--checkpoint", str(bad), "--out", str(tmp_path / "p")])
    assert code == main.EXIT_CHECKPOINT


def test_exit_code_mapping():
    from model.checkpoint import CheckpointError
    from utils.config import ConfigError, ConfigNotFoundError
    from utils.tabular import DatasetError

    assert main.exit_code_for(main.UsageError("x")) == 2
    assert main.exit_code_for(ConfigNotFoundError("x")) == 3
    assert main.exit_code_for(ConfigError("x")) == 4
    assert main.exit_code_for(CheckpointError("x")) == 5
    assert main.exit_code_for(DatasetError("x")) == 6
    assert main.exit_code_for(RuntimeError("x")) == 1


def _fake_csv(df, path):
    return str(path)


def test_synthetic_ctx_carries_npmle_settings(tmp_path):
    from types import SimpleNamespace

    from commands.eval_handlers import synthetic_payload
    from schemas import ExperimentSpec, NpmleConfig

    seen = {}

    def fake_run(spec, *, seed, ctx, workers, progress_cb):
        seen.update(ctx)
        empty = pd.DataFrame(columns=["family", "n", "estimator_id", "batches"])
        return SimpleNamespace(timings_ms={}, regret=empty, ttest=empty, plackett_luce=empty, losses=empty)

    npmle = NpmleConfig(refine=True, refine_rounds=3)
    cfg = SimpleNamespace(experiment=ExperimentSpec(estimators=["mle", "npmle"]), npmle=npmle, seed=0, checkpoint=None)
    synthetic_payload(
        cfg=cfg,
        rdir=tmp_path,
        run_id="r",
        progress_cb=lambda *a: None,
        workers=None,
        run_synthetic_fn=fake_run,
        run_ablation_fn=None,
        load_params_fn=None,
        checkpoint_error_cls=RuntimeError,
        write_csv_fn=_fake_csv,
        log_event_fn=lambda *a, **k: None,
    )
    assert seen["npmle"] is npmle


def test_real_theta_max_defaults_one_past_the_largest_count(tmp_path):
    from types import SimpleNamespace

    import numpy as np

    from commands.eval_handlers import real_payload
    from schemas import NpmleConfig, RealDataConfig

    caps = []

    def fake_score(task, est_id, fn, ctx):
        caps.append(ctx["theta_max"])
        return SimpleNamespace(model_dump=lambda: {"task_id": task.task_id, "estimator_id": est_id})

    tasks = [SimpleNamespace(task_id="t", xs=np.array([0, 3, 7]))]
    empty = pd.DataFrame()
    real_payload(
        cfg=SimpleNamespace(real=RealDataConfig(dataset="nhl", estimators=["erm"]), npmle=NpmleConfig()),
        rdir=tmp_path,
        run_id="r",
        progress_cb=lambda *a: None,
        load_tasks_fn=lambda real_cfg: (tasks, []),
        get_estimator_fn=lambda est_id: None,
        score_task_fn=fake_score,
        aggregate_scores_fn=lambda rows: SimpleNamespace(table=empty, ttests=empty, plackett_luce=empty),
        write_csv_fn=_fake_csv,
        log_event_fn=lambda *a, **k: None,
    )
    assert caps == [8.0, 8.0]


def test_certify_reports_when_the_leakage_bound_carries_the_pass():
    import numpy as np

    from commands.certify_handlers import certify_robbins
    from schemas import CertifyConfig

    cfg = CertifyConfig(d=3, M=5.0, D=[100.0], batches=4, max_n=6, tol=1e-6)
    table = certify_robbins(
        cfg,
        np.random.default_rng(0),
        forward_fn=lambda spec, xs: np.zeros(len(xs)) + 0.01,
        linear_forward_fn=lambda spec, xs: np.zeros(len(xs)) + 1.0,
        bound_fn=lambda spec, xs: np.full(len(xs), 0.02),
        oracle_fn=lambda xs, d, M: np.zeros(len(xs)),
    )
    rows = table.set_index("variant")
    assert rows.loc["softmax", "pass_reason"] == "within_leakage_bound"
    assert bool(rows.loc["softmax", "passed"]) is True
    assert bool(rows.loc["softmax", "within_tol"]) is False
    assert rows.loc["linear", "pass_reason"] == "failed"
