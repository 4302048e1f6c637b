"""
Quasipot — Command line.

    quasipot <command> <scenario.ini|report.json> [--out DIR] [--emit-plot-data] [--log-level LEVEL]

Exit codes: 0 ok, 2 bound failure, 3 nonexistence, 64 configuration,
65 symmetry required, 70 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys
from typing import List, Optional, Sequence

from quasipot import __version__
from quasipot.commands.registry import CommandContext, CommandRegistry
from quasipot.config import get_cfg, load_scenario
from quasipot.errors import ConfigError, QuasipotError

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.prog}: {message}")


def build_parser(commands: Sequence[str]) -> argparse.ArgumentParser:
    parser = _Parser(prog="quasipot", description="Sublinear equations on finite quasi-metric spaces.")
    parser.add_argument("--version", action="version", version=f"quasipot {__version__}")
    parser.add_argument("command", choices=list(commands))
    parser.add_argument("scenario", type=pathlib.Path, help="INI scenario or a JSON report to re-run")
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("out"), help="output directory")
    parser.add_argument("--emit-plot-data", action="store_true", help="write radial step-function CSVs")
    parser.add_argument(
        "--log-level",
        default=get_cfg("log_level", "WARNING"),
        help="logging level (default: $QUASIPOT_LOG_LEVEL or WARNING)",
    )
    return parser


def configure_logging(level: str) -> None:
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise ConfigError(f"unknown log level {level!r}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    registry = CommandRegistry()
    try:
        args = build_parser(registry.available_commands()).parse_args(argv)
        configure_logging(args.log_level)
        scenario = load_scenario(args.scenario)
    except QuasipotError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    ctx = CommandContext(
        scenario=scenario,
        out_dir=args.out.resolve(),
        emit_plot_data=args.emit_plot_data,
        version=__version__,
    )
    outcome = registry.execute(args.command, ctx)
    print(outcome.summary)
    for path in outcome.files:
        print(f"  {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
