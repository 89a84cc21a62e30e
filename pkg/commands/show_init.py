"""
Show-init command for STRADDLE_BENCH
Prints an initialiser's weight matrix for inspection
"""

from config.settings import Settings
from core.initialisers import InitialiserKind, InitialiserSpec, is_deterministic, make_weights
from core.numerics import Rng


def register(subparsers):
    parser = subparsers.add_parser("show-init", help="Print an initial weight matrix")
    parser.add_argument("kind", choices=[kind.value for kind in InitialiserKind])
    parser.add_argument("m", type=int, help="Fan-in (rows)")
    parser.add_argument("n", type=int, help="Fan-out (columns)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--stddev", type=float, help="Standard deviation for 'random'")
    parser.set_defaults(handler=cmd_show_init)


def render_matrix(weights, integral: bool) -> str:
    if integral:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in weights)
    return "\n".join(" ".join(f"{v: .4f}" for v in row) for row in weights)


def cmd_show_init(args, settings: Settings) -> int:
    spec = InitialiserSpec(
        kind=args.kind,
        random_stddev=settings.random_normal_stddev if args.stddev is None else args.stddev,
    )
    weights = make_weights(spec, Rng(args.seed), args.m, args.n)
    print(render_matrix(weights, is_deterministic(spec.kind)))
    return 0
