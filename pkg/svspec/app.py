# svspec/app.py
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from ._version import __version__
from .api.__all_commands__ import all_commands
from .api.deps import CommandHandler

__all__ = ["create_parser", "main"]

EPILOG = """\
exit codes:
  0   success
  1   input or validation error (ParseError, NotHermitian, OutOfDomain, BadKind, DegenerateMean, MeanNotZero)
  2   spectrum certification (CountMismatch, ZeroOnContour, NonIntegerWinding, NotAnEigenvalue,
      IndexingAmbiguous, GramNotPositive)
  3   data sufficiency or series (InsufficientShells, TailTooLarge, NearPole)
  4   scalar data (NotMonotone, InterlacingViolated, NonPositiveAlpha, ProductNotConverged)
  5   integration (StepLimitExceeded, ToleranceNotMet)
  6   inverse kit (OutOfNeighborhood, SpectraTooClose, WrongIndexCombination, CoincidentEigenvalues,
      RankDeficientGram, CountingHypothesisViolated, SingularUpperBlock, SingularY, LogDivergent)
  70  unexpected internal error

environment: SVSPEC_* variables override defaults (SVSPEC_ODE__REL_TOL, ...);
SVSPEC_THREADS takes precedence over --threads.
"""


def _install_global_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("global options")
    g.add_argument("--rel-tol", type=float, default=None, help="ODE relative tolerance")
    g.add_argument("--threads", type=int, default=None, help="worker threads")
    g.add_argument("--seed", type=int, default=None, help="seed for randomized tasks")
    g.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    g.add_argument("--out", default=None, help="output path (reports go to stdout when omitted)")
    g.add_argument("--format", choices=["json", "csv"], default=None,
                   help="artifact format; each command writes the one it supports")


def _install_commands(sub: argparse._SubParsersAction) -> None:
    for register in all_commands:
        register(sub)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svspec",
        description="Direct and inverse spectral tooling for matrix Sturm-Liouville operators on [0, 1].",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _install_global_flags(parser)
    sub = parser.add_subparsers(dest="command", metavar="{spectrum,mfun,check,inverse,scalar}")
    sub.required = True
    _install_commands(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    try:
        settings = CommandHandler.get_settings(args)
    except Exception as e:
        print(f"svspec: invalid settings: {e}", file=sys.stderr)
        return CommandHandler.exit_code_for(e)
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return int(args.handler(args))


if __name__ == "__main__":
    sys.exit(main())
