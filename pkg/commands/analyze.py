"""
Analyze command for STRADDLE_BENCH
Recomputes convergence and p-values from a runs file without retraining
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from config.settings import Settings
from core.analysis import REFERENCE_INITIALISER, summarise
from core.errors import ConfigError
from core.reporting import METADATA_FILE, format_summary_table, read_runs_csv, summary_document, write_json

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("analyze", help="Summarise a runs file")
    parser.add_argument("runs_file", help="runs.csv written by 'run'")
    parser.add_argument("--epsilon", type=float, help="Convergence band half-width (default: from metadata.json)")
    parser.add_argument("--alpha", type=int, help="Convergence window in epochs (default: from metadata.json)")
    parser.add_argument("--loss", choices=("train", "test"), help="Loss series to analyse (default: from metadata.json, else train)")
    parser.add_argument(
        "--reference",
        help=f"Initialiser the others are tested against (default: from metadata.json, else {REFERENCE_INITIALISER})",
    )
    parser.add_argument("--out", help="Write the summary JSON here")
    parser.set_defaults(handler=cmd_analyze)


def _read_metadata(runs_file: str) -> Tuple[Path, Dict[str, Any]]:
    metadata_path = Path(runs_file).parent / METADATA_FILE
    if not metadata_path.is_file():
        return metadata_path, {}
    with open(metadata_path, "r", encoding="utf-8") as f:
        return metadata_path, json.load(f)


def _analysis_parameters(args) -> Tuple[float, int, str, str]:
    """Explicit flags win; otherwise use what 'run' recorded next to the runs file"""
    metadata_path, metadata = _read_metadata(args.runs_file)
    config = metadata.get("config", {})

    epsilon = args.epsilon if args.epsilon is not None else config.get("convergence_epsilon")
    alpha = args.alpha if args.alpha is not None else config.get("convergence_alpha")
    if epsilon is None or alpha is None:
        if not metadata:
            raise ConfigError(f"--epsilon and --alpha are required ({metadata_path} not found)")
        raise ConfigError(f"{metadata_path} does not record convergence parameters")

    loss = args.loss or metadata.get("loss", "train")
    reference = args.reference or metadata.get("reference", REFERENCE_INITIALISER)
    return float(epsilon), int(alpha), loss, reference


def cmd_analyze(args, settings: Settings) -> int:
    epsilon, alpha, loss, reference = _analysis_parameters(args)
    logs = read_runs_csv(args.runs_file)
    logger.info(f"Loaded {len(logs)} runs from {args.runs_file} (loss={loss}, reference={reference})")

    rows = summarise(logs, epsilon, alpha, loss, reference)
    if args.out:
        write_json(summary_document(rows, epsilon, alpha, loss, reference), args.out)

    print(format_summary_table(rows))
    return 0
