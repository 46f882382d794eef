"""Command-line entrypoint wiring subcommands to handlers."""

from __future__ import annotations

import argparse
from functools import partial
import json
import logging
import os
import sys

from dotenv import load_dotenv
import torch

from commands.bench_handlers import worst_case_payload
from commands.certify_handlers import certify_payload
from commands.eval_handlers import load_tasks, real_payload, synthetic_payload, timing_payload
from commands.probe_handlers import probe_payload
from commands.train_handlers import train_payload
from estimators import ESTIMATOR_IDS, get_estimator
from estimators.mle import mle
from estimators.robbins import robbins_clipped
from model.checkpoint import CheckpointError, load_params, save_params
from model.probes import grid_prior_sampler, probe_depth_profile
from model.robbins_net import leakage_bound, robbins_net_forward, robbins_net_linear_forward
from model.training import DivergenceError, build_model, draw_training_group, evaluate_mse, train
from orchestrator import run_mixture_ablation, run_synthetic
from schemas import RunConfig
from services.real_eval import aggregate_scores, score_task
from services.run_worker import execute_run
from services.timing import timing_benchmark
from utils.config import (
    ConfigError,
    ConfigNotFoundError,
    apply_overrides,
    config_from_dict,
    config_parse,
    runtime_settings,
)
from utils.poisson import separable_regret
from utils.real_data import TaskSkipped, load_mlb, load_nhl, load_wordfreq
from utils.runs import new_run_id, run_dir, write_json
from utils.tabular import DatasetError, write_csv
from utils.worst_case import cached_worst_case, equalization_gap

load_dotenv()
logger = logging.getLogger("poisson_eb")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG_NOT_FOUND = 3
EXIT_CONFIG_INVALID = 4
EXIT_CHECKPOINT = 5
EXIT_DATASET = 6
EXIT_CERTIFICATION_FAILED = 7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _log_event(event: str, *, run_id: str, **fields) -> None:
    payload = {"event": event, "run_id": run_id, **fields}
    logger.info(json.dumps(payload, sort_keys=True, default=str))


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, ConfigNotFoundError):
        return EXIT_CONFIG_NOT_FOUND
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG_INVALID
    if isinstance(exc, CheckpointError):
        return EXIT_CHECKPOINT
    if isinstance(exc, DatasetError):
        return EXIT_DATASET
    return EXIT_RUNTIME


def _estimator_list(value: str) -> list[str]:
    ids = [v.strip() for v in value.split(",") if v.strip()]
    unknown = [v for v in ids if v not in ESTIMATOR_IDS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown estimator(s): {', '.join(unknown)}")
    return ids


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", "--spec", dest="config", default=None, help="YAML config file (version 1)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory for this run")
    common.add_argument("--threads", type=int, default=None, help="worker cap")
    common.add_argument("--deterministic", action="store_true", help="single-threaded numeric paths")
    common.add_argument("--estimators", type=_estimator_list, default=None, help="comma-separated estimator ids")
    common.add_argument("--checkpoint", default=None, help="tinyformer checkpoint file")

    parser = _Parser(prog="poisson-eb", description="Empirical-Bayes Poisson mean estimation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("train", parents=[common], help="train a tinyformer")

    ev = sub.add_parser("eval", help="evaluate estimators")
    ev_sub = ev.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    ev_sub.add_parser("synthetic", parents=[common], help="regret on synthetic prior families")
    ev_sub.add_parser("real", parents=[common], help="score on NHL, MLB or word-frequency tasks")
    ev_sub.add_parser("timing", parents=[common], help="per-batch wall time vs sequence length")

    cert = sub.add_parser("certify-robbins", parents=[common], help="check the constructed Robbins networks")
    cert.add_argument("--d", type=int, default=None)
    cert.add_argument("--M", type=float, default=None)
    cert.add_argument("--D", type=float, action="append", default=None)
    cert.add_argument("--batches", type=int, default=None)

    sub.add_parser("probe", parents=[common], help="probe a trained tinyformer layer by layer")

    bench = sub.add_parser("bench", help="solver and timing benchmarks")
    bench_sub = bench.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    bench_sub.add_parser("timing", parents=[common], help="same as eval timing")
    bench_sub.add_parser("worst-case", parents=[common], help="least-favorable prior and its equalization gap")
    return parser


def _subcommand(args) -> str:
    mode = getattr(args, "mode", None)
    return f"{args.command} {mode}" if mode else args.command


def _load_config(args):
    cfg = config_parse(args.config) if args.config else config_from_dict({})
    if args.command == "certify-robbins":
        section = cfg.certify.model_dump()
        for key in ("d", "M", "D", "batches"):
            value = getattr(args, key, None)
            if value is not None:
                section[key] = value
        data = cfg.model_dump(mode="json")
        data.update({"certify": section, "preset": None})
        cfg = config_from_dict(data).model_copy(update={"preset": cfg.preset})
    return apply_overrides(cfg, seed=args.seed, output_dir=args.out, estimators=args.estimators, checkpoint=args.checkpoint)


def _configure(args) -> int:
    settings = runtime_settings()
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO), format="%(message)s")
    if args.deterministic or (settings.deterministic and args.threads is None):
        os.environ["EB_DETERMINISTIC"] = "1"
        torch.set_num_threads(1)
        return 1
    return max(1, args.threads or settings.threads)


def _handler(subcommand: str, workers: int):
    """Handler for a subcommand with every dependency bound except run-time context."""
    if subcommand == "train":
        return partial(
            train_payload,
            train_fn=train,
            save_params_fn=save_params,
            evaluate_mse_fn=evaluate_mse,
            draw_training_group_fn=draw_training_group,
            write_csv_fn=write_csv,
            divergence_error_cls=DivergenceError,
        )
    if subcommand == "eval synthetic":
        return partial(
            synthetic_payload,
            workers=workers,
            run_synthetic_fn=run_synthetic,
            run_ablation_fn=run_mixture_ablation,
            load_params_fn=load_params,
            checkpoint_error_cls=CheckpointError,
            write_csv_fn=write_csv,
        )
    if subcommand == "eval real":
        return partial(
            real_payload,
            load_tasks_fn=partial(
                load_tasks,
                load_nhl_fn=load_nhl,
                load_mlb_fn=load_mlb,
                load_wordfreq_fn=load_wordfreq,
                dataset_error_cls=DatasetError,
                task_skipped_cls=TaskSkipped,
            ),
            get_estimator_fn=get_estimator,
            score_task_fn=score_task,
            aggregate_scores_fn=aggregate_scores,
            write_csv_fn=write_csv,
        )
    if subcommand in ("eval timing", "bench timing"):
        return partial(
            timing_payload,
            timing_benchmark_fn=timing_benchmark,
            build_model_fn=build_model,
            load_params_fn=load_params,
            write_csv_fn=write_csv,
        )
    if subcommand == "certify-robbins":
        return partial(
            certify_payload,
            forward_fn=robbins_net_forward,
            linear_forward_fn=robbins_net_linear_forward,
            bound_fn=leakage_bound,
            oracle_fn=robbins_clipped,
            write_csv_fn=write_csv,
            write_json_fn=write_json,
        )
    if subcommand == "probe":
        return partial(
            probe_payload,
            load_params_fn=load_params,
            probe_depth_profile_fn=probe_depth_profile,
            prior_sampler_fn=grid_prior_sampler,
            checkpoint_error_cls=CheckpointError,
            write_csv_fn=write_csv,
        )
    if subcommand == "bench worst-case":
        return partial(
            worst_case_payload,
            solve_fn=cached_worst_case,
            gap_fn=equalization_gap,
            regret_fn=separable_regret,
            mle_fn=mle,
            write_json_fn=write_json,
        )
    raise UsageError(f"unknown subcommand: {subcommand}")


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help exits through argparse.
        return int(e.code or 0)

    subcommand = _subcommand(args)
    try:
        workers = _configure(args)
        cfg = _load_config(args)
        handler = _handler(subcommand, workers)
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)

    run_id = new_run_id()
    rdir = run_dir(run_id, cfg.output_dir)
    run_cfg = RunConfig(
        subcommand=subcommand,
        config_path=args.config,
        seed=cfg.seed,
        output_dir=str(rdir),
        estimators=list(args.estimators or []),
        checkpoints=[cfg.checkpoint] if cfg.checkpoint else [],
    )
    def body(progress_cb) -> dict:
        return handler(cfg=cfg, rdir=rdir, run_id=run_id, progress_cb=progress_cb, log_event_fn=_log_event)

    try:
        summary = execute_run(
            run_id=run_id,
            subcommand=subcommand,
            rdir=rdir,
            config={"run": run_cfg.model_dump(mode="json"), "config": cfg.model_dump(mode="json")},
            seed=cfg.seed,
            body_fn=body,
            log_event_fn=_log_event,
            exit_code_fn=exit_code_for,
        )
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    code = int(summary.get("exit_code", EXIT_OK))
    if code == EXIT_CERTIFICATION_FAILED:
        print("certification failed; see certify.json", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
