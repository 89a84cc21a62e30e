"""
Synthetic data command for STRADDLE_BENCH
"""

import logging

from config.settings import Settings
from core.data import export_dataset_csv, generate_synthetic
from core.numerics import Rng

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("gen-synthetic", help="Export the synthetic dataset as CSV + JSON sidecar")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="CSV path; metadata goes to the same name with .json")
    parser.add_argument("--records", type=int, default=5000)
    parser.add_argument("--features", type=int, default=100)
    parser.add_argument("--latent-dim", type=int, default=20)
    parser.set_defaults(handler=cmd_gen_synthetic)


def cmd_gen_synthetic(args, settings: Settings) -> int:
    dataset = generate_synthetic(Rng(args.seed), args.records, args.latent_dim, args.features)
    written = export_dataset_csv(dataset, args.out)
    print(written["csv"])
    print(written["metadata"])
    return 0
