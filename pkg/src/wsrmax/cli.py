"""Command-line front end for the experiment runner.

Verbs: solve, certify, sweep, bench. Each verb reads an optional config
file and applies flag overrides on top, so quick runs need no config at
all::

    wsrmax solve --out runs/demo --seeds 0,1,2 --alpha 0.5 --mode total
    wsrmax sweep --out runs/sweep --seeds 0,1,2,3,4
    wsrmax certify --config certify.cfg --out runs/cert
    wsrmax bench --out runs/bench
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    EXIT_BAD_CONFIG,
    ConfigError,
    config_from_mapping,
    load_config,
    parse_config_text,
    run_experiment,
)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="experiment config file")
    p.add_argument("--out", metavar="DIR", help="output directory for artifacts")
    p.add_argument("--seeds", metavar="CSV",
                   help="comma-separated seed list, e.g. 0,1,2")
    p.add_argument("--alpha", type=float, metavar="REAL",
                   help="interference scale for cross channels")
    p.add_argument("--mode", choices=("total", "perlink", "grouped"),
                   help="power constraint structure")
    p.add_argument("--max-iters", type=int, metavar="INT",
                   help="iteration cap for the solver")
    p.add_argument("--tol", type=float, metavar="REAL",
                   help="relative objective-change stopping tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsrmax",
        description="Weighted sum-rate maximization experiments on MIMO "
        "interference networks.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, helptext in (
        ("solve", "solve random instances and write traces/summaries"),
        ("certify", "solve and certify reciprocal-network duality"),
        ("sweep", "sweep the interference scale over a seed list"),
        ("bench", "time the iteration kernels and fit scaling slopes"),
    ):
        p = sub.add_parser(verb, help=helptext)
        _add_common_flags(p)
    return parser


def _config_from_args(args: argparse.Namespace):
    if args.config:
        raw = parse_config_text(open(args.config).read())
    else:
        raw = {}
    raw["mode"] = args.verb
    if args.seeds is not None:
        raw["seeds"] = args.seeds
    if args.alpha is not None:
        raw["alpha"] = repr(args.alpha)
    if args.mode is not None:
        raw["constraint"] = args.mode
    if args.max_iters is not None:
        raw["max_iters"] = str(args.max_iters)
    if args.tol is not None:
        raw["obj_tol"] = repr(args.tol)
    if args.out is not None:
        raw["out"] = args.out
    return config_from_mapping(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return run_experiment(config)


if __name__ == "__main__":
    raise SystemExit(main())
