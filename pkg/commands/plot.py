"""
Plot command for STRADDLE_BENCH
"""

import logging
from pathlib import Path

from config.settings import Settings
from core.reporting import plot_loss_curves, read_runs_csv

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("plot", help="Draw epoch-mean loss curves as SVG")
    parser.add_argument("runs_file")
    parser.add_argument("--out", help="SVG path (default: loss_<loss>.svg next to the runs file)")
    parser.add_argument("--loss", choices=("train", "test"), default="train")
    parser.add_argument("--level", type=float, default=0.95, help="Confidence level of the shaded band")
    parser.set_defaults(handler=cmd_plot)


def cmd_plot(args, settings: Settings) -> int:
    out = Path(args.out) if args.out else Path(args.runs_file).parent / f"loss_{args.loss}.svg"
    logs = read_runs_csv(args.runs_file)
    plot_loss_curves(logs, out, which=args.loss, level=args.level)
    print(out)
    return 0
