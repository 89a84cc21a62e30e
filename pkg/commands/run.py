"""
Run command for STRADDLE_BENCH
Trains every initialiser and writes runs, summary, metadata and figures
"""

import argparse
import logging
from datetime import datetime
from pathlib import Path

from config.settings import Settings
from core.analysis import REFERENCE_INITIALISER, summarise
from core.experiment import ExperimentRunner, builtin_config, load_config, parse_config
from core.reporting import (
    METADATA_FILE,
    RUNS_FILE,
    SUMMARY_FILE,
    format_summary_table,
    metadata_document,
    plot_loss_curves,
    summary_document,
    write_json,
    write_runs_csv,
)

logger = logging.getLogger(__name__)

PRESETS = ("synthetic", "mnist", "swarm")


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def register(subparsers):
    parser = subparsers.add_parser("run", help="Run a benchmark experiment")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("config_path", nargs="?", help="Experiment config (JSON)")
    source.add_argument("--preset", choices=PRESETS, help="Published settings for one dataset")
    parser.add_argument("--out", help="Output directory (default: <output_dir>/<experiment name>)")
    parser.add_argument("--workers", type=positive_int, help="Parallel training runs")
    parser.add_argument("--loss", choices=("train", "test"), default="train", help="Loss used for the summary")
    parser.add_argument("--epochs", type=int, help="Override the number of epochs")
    parser.add_argument("--runs", type=int, help="Override the number of runs per initialiser")
    parser.set_defaults(handler=cmd_run)


def _resolve_config(args, settings: Settings):
    cfg = load_config(args.config_path) if args.config_path else builtin_config(args.preset, settings)

    overrides = {key: value for key, value in (("epochs", args.epochs), ("runs", args.runs)) if value is not None}
    if overrides:
        logger.info(f"Overriding config values: {overrides}")
        cfg = parse_config({**cfg.model_dump(mode="json"), **overrides})
    return cfg


def cmd_run(args, settings: Settings) -> int:
    """Run the experiment and write the output bundle"""
    started_at = datetime.now()
    cfg = _resolve_config(args, settings)
    out_dir = Path(args.out or settings.get_output_path(cfg.name))

    runner = ExperimentRunner(settings)
    data = runner.prepare_data(cfg)
    logs = runner.run(cfg, data=data, workers=args.workers)

    rows = summarise(logs, cfg.convergence_epsilon, cfg.convergence_alpha, args.loss, REFERENCE_INITIALISER)

    write_runs_csv(logs, out_dir / RUNS_FILE)
    write_json(
        summary_document(rows, cfg.convergence_epsilon, cfg.convergence_alpha, args.loss, REFERENCE_INITIALISER),
        out_dir / SUMMARY_FILE,
    )
    write_json(
        metadata_document(
            config=cfg.model_dump(mode="json"),
            logs=logs,
            prng=settings.prng_algorithm,
            version=settings.app_version,
            dataset_checksum=data.dataset_checksum,
            split_checksum=data.split.checksum(),
            started_at=started_at,
            loss=args.loss,
            reference=REFERENCE_INITIALISER,
        ),
        out_dir / METADATA_FILE,
    )
    for which in ("train", "test"):
        plot_loss_curves(logs, out_dir / f"loss_{which}.svg", which=which, title=f"{cfg.name}: {which} loss")

    print(format_summary_table(rows))
    print(f"\nOutputs written to {out_dir}")
    return 0
