from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from collections.abc import Sequence

from .. import __version__
from ..errors import ProjGPError
from ..utils.logging import setup_logging
from .commands import COMMANDS

__all__ = (
    "build_parser",
    "main",
)


log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projgp",
        description="Gaussian process regression with projected additive kernels.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="logging level, e.g. DEBUG or INFO")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    for cmd in COMMANDS.values():
        sub = subparsers.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        for add_arguments in cmd.arguments:
            add_arguments(sub)
        sub.add_argument("--seed", type=int, help="random seed (default: $PROJGP_SEED or 0)")
        sub.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
        sub.add_argument("--out", help="output path; .csv and .json files are written next to it")
        sub.set_defaults(func=cmd.callback)

    return parser


def report_error(error: BaseException) -> None:
    record = error.to_record() if isinstance(error, ProjGPError) else {"error": type(error).__name__, "message": str(error)}
    print(json.dumps(record, default=str), file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level.upper() if args.log_level else None)

    try:
        report = args.func(args)
    except ProjGPError as e:
        log.error("%s failed: %s", args.command, e)
        report_error(e)
        return e.exit_code
    except ValueError as e:
        log.error("%s failed: %s", args.command, e)
        report_error(e)
        return EXIT_USAGE
    except Exception as e:
        tb = "".join(traceback.format_exception(type(e), e, e.__traceback__))
        log.error(f"Unhandled exception in command: {args.command}\n\n{type(e).__name__}: {e}\n\n{tb}")
        report_error(e)
        return EXIT_NUMERICAL

    if report is not None:
        report.write(args.out)
    return EXIT_OK
