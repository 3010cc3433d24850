from __future__ import annotations

import argparse
import importlib.metadata
import logging
from pathlib import Path

from ring_harvest.ringconfig import ScenarioConfig
from ring_harvest.ringconfig import write_new_config
from ring_harvest.ringmodel import ConfigError
from ring_harvest.ringmodel import NumericalError
from ring_harvest.ringmodel import RingHarvestError
from ring_harvest.ringrecipes import FIGURE_RECIPES
from ring_harvest.ringrecipes import recipe_config
from ring_harvest.ringrunner import run_scenario

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# Subcommands that select the analysis of the given config.
ANALYSIS_COMMANDS = {
    "geometry": "geometry",
    "coupling": "coupling",
    "transport": "transport",
    "bands": "bands",
    "zak": "zak",
    "edges": "edges",
    "steady": "steady",
    "analytics": "analytics",
    "trap-optimum": "trap_optimum",
}


def parse_args(args: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="ring-harvest",
        description="Simulate excitation transport and light trapping in lattices "
        "of dipole-coupled emitter rings.",
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {_version()}",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--set",
        help="Override a config value as section.key=value. Repeatable.",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
    )
    common.add_argument(
        "--output",
        help="Output directory. Default: [output] directory or $RING_HARVEST_OUTPUT.",
        default=None,
    )
    common.add_argument(
        "--workers",
        help="Worker processes for sweeps and ensembles. Default: available cores.",
        type=int,
        default=None,
    )
    common.add_argument(
        "--debug",
        help="Enable debug logging.",
        default=False,
        action="store_true",
    )
    common.add_argument(
        "--log-file",
        help="Enable logging to a file next to the config file.",
        default=False,
        action="store_true",
    )

    commands = parser.add_subparsers(dest="command", required=True)

    make_config = commands.add_parser(
        "make-config",
        help="Create a default configuration file.",
    )
    make_config.add_argument("config", type=str, help="Path of the new file.")

    for command in ANALYSIS_COMMANDS:
        sub = commands.add_parser(
            command,
            parents=[common],
            help=f"Run the {command} analysis on a scenario file.",
        )
        sub.add_argument("config", type=str, help="The path to the scenario file.")

    sweep = commands.add_parser(
        "sweep",
        parents=[common],
        help="Run the scenario's analysis over its [sweep] axes.",
    )
    sweep.add_argument("config", type=str, help="The path to the scenario file.")

    reproduce = commands.add_parser(
        "reproduce",
        parents=[common],
        help="Run a bundled figure recipe.",
    )
    reproduce.add_argument(
        "figure",
        type=str,
        choices=sorted(FIGURE_RECIPES),
        help="The figure id.",
    )

    return parser.parse_args(args)


def add_file_handler_to_logging(config_filepath: str) -> None:
    """Add a file handler to the root logger next to the config file provided."""
    filepath = Path(config_filepath).absolute()
    log_filepath = filepath.parent / f"{filepath.stem}.log"
    file_handler = logging.FileHandler(log_filepath)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    logging.getLogger().addHandler(file_handler)


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    """Load the scenario named on the command line and apply its overrides."""
    if args.command == "reproduce":
        config = recipe_config(args.figure)
    else:
        config = ScenarioConfig(args.config)

    if args.command in ANALYSIS_COMMANDS:
        config.override(
            f"scenario.analysis={ANALYSIS_COMMANDS[args.command]}", record=False
        )
    if args.command == "sweep" and not config.sweep_axes:
        raise ConfigError(f"sweep: {config.source} has no [sweep] axes")

    for assignment in args.set:
        config.override(assignment)
    if args.output is not None:
        config.override(f"output.directory={args.output}")
    return config


def main(*, cli_args: list[str] | None = None) -> int:
    """Main entry point."""
    args = parse_args(cli_args)

    if args.command == "make-config":
        write_new_config(args.config)
        return EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
    )

    if args.log_file:
        if args.command == "reproduce":
            add_file_handler_to_logging(f"{args.figure}.ini")
        else:
            add_file_handler_to_logging(args.config)

    logger = logging.getLogger(__name__)
    try:
        config = load_config(args)
        paths = run_scenario(config, workers=args.workers)

    except NumericalError as error:
        logger.error("Numerical failure: %s", error)
        return EXIT_NUMERIC

    except (RingHarvestError, ValueError) as error:
        logger.error("Invalid scenario: %s", error)
        return EXIT_CONFIG

    for path in paths:
        logger.info("Wrote %s", path)
    return EXIT_OK


def _version() -> str:
    try:
        return importlib.metadata.version("ring-harvest")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


if __name__ == "__main__":
    raise SystemExit(main())
