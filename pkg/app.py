"""
STRADDLE_BENCH - weight initialiser benchmark for autoencoders
Main command-line application
"""
import argparse
import logging
import sys
from typing import List, Optional

from config.settings import Settings
from core.errors import StraddleBenchError
from commands import analyze, plot, run, show_init, synthetic

logger = logging.getLogger(__name__)


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="straddle-bench",
        description=f"{settings.app_name} {settings.app_version}: benchmark weight initialisers on autoencoders",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level (default: %(default)s)")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (run, analyze, plot, synthetic, show_init):
        command.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings()
    parser = build_parser(settings)
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        return args.handler(args, settings)
    except (StraddleBenchError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
