"""Command handler helpers for certify handlers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from schemas import CertifyConfig, RobbinsNetSpec

CERTIFICATION_FAILED_EXIT = 7


def random_certify_batches(cfg: CertifyConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """Batches of length 1..max_n with values in 0..d."""
    lengths = rng.integers(1, cfg.max_n + 1, size=cfg.batches)
    return [rng.integers(0, cfg.d + 1, size=int(n)) for n in lengths]


def pass_reason(dev: float, tol: float, bound: float = 0.0) -> str:
    if dev <= tol:
        return "within_tol"
    if dev <= bound:
        return "within_leakage_bound"
    return "failed"


def certify_robbins(
    cfg: CertifyConfig,
    rng: np.random.Generator,
    *,
    forward_fn,
    linear_forward_fn,
    bound_fn,
    oracle_fn,
) -> pd.DataFrame:
    """One row per softmax D plus one for the linear variant: max deviation from clipped Robbins."""
    batches = random_certify_batches(cfg, rng)
    rows = []
    for D in cfg.D:
        spec = RobbinsNetSpec(d=cfg.d, M=cfg.M, D=D)
        dev, bound = 0.0, 0.0
        for xs in batches:
            ref = oracle_fn(xs, cfg.d, cfg.M)
            dev = max(dev, float(np.max(np.abs(forward_fn(spec, xs) - ref))))
            bound = max(bound, float(np.max(bound_fn(spec, xs))))
        rows.append(
            {
                "variant": "softmax",
                "D": D,
                "max_deviation": dev,
                "max_bound": bound,
                "within_tol": dev <= cfg.tol,
                "passed": dev <= max(cfg.tol, bound),
                "pass_reason": pass_reason(dev, cfg.tol, bound),
            }
        )

    spec = RobbinsNetSpec(d=cfg.d, M=cfg.M)
    dev = 0.0
    for xs in batches:
        dev = max(dev, float(np.max(np.abs(linear_forward_fn(spec, xs) - oracle_fn(xs, cfg.d, cfg.M)))))
    rows.append(
        {
            "variant": "linear",
            "D": float("nan"),
            "max_deviation": dev,
            "max_bound": 0.0,
            "within_tol": dev <= cfg.linear_tol,
            "passed": dev <= cfg.linear_tol,
            "pass_reason": pass_reason(dev, cfg.linear_tol),
        }
    )
    return pd.DataFrame(rows, columns=["variant", "D", "max_deviation", "max_bound", "within_tol", "passed", "pass_reason"])


def certify_payload(
    *,
    cfg,
    rdir: Path,
    run_id: str,
    progress_cb,
    forward_fn,
    linear_forward_fn,
    bound_fn,
    oracle_fn,
    write_csv_fn,
    write_json_fn,
    log_event_fn,
) -> dict:
    progress_cb("certify", {"progress_pct": 10})
    table = certify_robbins(
        cfg.certify,
        np.random.default_rng(cfg.seed),
        forward_fn=forward_fn,
        linear_forward_fn=linear_forward_fn,
        bound_fn=bound_fn,
        oracle_fn=oracle_fn,
    )
    passed = bool(table["passed"].all())
    records = table.astype(object).where(table.notna(), None).to_dict(orient="records")
    for row in records:
        log_event_fn("certification_result", run_id=run_id, **row)
    csv_path = write_csv_fn(table, rdir / "certify.csv")
    report = {
        "d": cfg.certify.d,
        "M": cfg.certify.M,
        "batches": cfg.certify.batches,
        "max_n": cfg.certify.max_n,
        "passed": passed,
        "rows": records,
    }
    json_path = write_json_fn(rdir, "certify.json", report)
    return {
        "outputs": [csv_path, json_path],
        "summary": {"passed": passed},
        "exit_code": 0 if passed else CERTIFICATION_FAILED_EXIT,
    }
