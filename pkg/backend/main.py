"""
DAB verifier - command-line entry point
"""
import argparse
import logging
import random
import sys
from typing import List, Optional

from backend.config import (
    APP_DESCRIPTION, APP_NAME, APP_VERSION, DEFAULT_SEED, MAX_NODES, MAX_SECONDS, SOLVER_TIMEOUT_MS,
)
from backend.cli.commands import COMMANDS


def add_mode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--case-bound", type=int, default=None, help="Max number of cases (default: unbounded)")
    parser.add_argument("--repo-bound", type=int, default=None, help="Max tuples per repository relation")
    parser.add_argument("--insertion", choices=["multiset", "set"], default="multiset")


def add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["internal", "external"], default=None,
                        help="Decision procedure (default: external when a solver is configured)")
    parser.add_argument("--solver", default=None, help='External solver command, e.g. "z3 -in -smt2" or "z3py"')
    parser.add_argument("--timeout-ms", type=int, default=SOLVER_TIMEOUT_MS)


def add_oracle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-cases", type=int, default=None)
    parser.add_argument("--max-rows", type=int, default=None)
    parser.add_argument("--max-steps", type=int, default=None)
    parser.add_argument("--fresh", type=int, default=None, help="Fresh values per value sort")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)

    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="Validate a model")
    p.add_argument("model")

    p = sub.add_parser("classify", parents=[common], help="Report the decidability classification")
    p.add_argument("model")
    add_mode_flags(p)
    p.add_argument("--report", default=None, help="Write the classification as JSON")

    p = sub.add_parser("translate", parents=[common], help="Emit the artifact system")
    p.add_argument("model")
    add_mode_flags(p)
    p.add_argument("--emit", choices=["arts", "mcmt-like"], default="arts")
    p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("verify", parents=[common], help="Check a safety property")
    p.add_argument("model")
    p.add_argument("property")
    add_mode_flags(p)
    add_backend_flags(p)
    add_oracle_flags(p)
    p.add_argument("--max-nodes", type=int, default=MAX_NODES)
    p.add_argument("--max-seconds", type=float, default=MAX_SECONDS)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--tree-out", default=None)
    p.add_argument("--no-replay", dest="replay", action="store_false")
    p.add_argument("--audit", action="store_true")
    p.add_argument("--cross-check", nargs="?", const="z3py", default=None, metavar="CMD",
                   help="Re-decide every solver obligation with CMD (default z3py, or internal)")

    p = sub.add_parser("simulate", parents=[common], help="Bounded forward search on one catalog")
    p.add_argument("model")
    p.add_argument("catalog")
    p.add_argument("property")
    p.add_argument("--insertion", choices=["multiset", "set"], default="multiset")
    add_oracle_flags(p)

    p = sub.add_parser("bench", parents=[common], help="Run a benchmark suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--jobs", type=int, default=None)
    add_backend_flags(p)
    p.add_argument("--max-nodes", type=int, default=MAX_NODES)
    p.add_argument("--max-seconds", type=float, default=MAX_SECONDS)
    p.add_argument("--no-replay", dest="replay", action="store_false")
    return parser


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    random.seed(args.seed)
    logger = logging.getLogger(__name__)
    logger.debug(f"{APP_NAME} v{APP_VERSION}: {args.command}")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
