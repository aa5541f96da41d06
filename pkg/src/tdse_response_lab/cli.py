"""Command line front end: ``tdse-lab run`` and ``tdse-lab sweep``.

Exit codes: 0 on success, 1 on any error, 2 when a bound check is violated.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .config import ENV_VAR_DOCS, LabConfig, set_config
from .exceptions import BoundViolationError, ConfigurationError, TDSELabError
from .runner import ScenarioRunner
from .scenario import load_scenario
from .util import ValidationUtils

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for both subcommands."""
    parser = argparse.ArgumentParser(
        prog="tdse-lab",
        description="Mild Schrodinger dynamics and linear response experiments.",
        epilog=ENV_VAR_DOCS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path, help="scenario TOML file")
    common.add_argument("--plots", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    common.add_argument("--out", type=Path, default=None, help="output root directory")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="override TDSE_LAB_LOG_LEVEL",
    )

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run one scenario")
    sweep = commands.add_parser("sweep", parents=[common], help="run a scenario per value")
    sweep.add_argument("--param", required=True, help="scalar field, e.g. T or time.steps")
    sweep.add_argument("--values", required=True, help="comma-separated list of values")
    return parser


def _configure_logging(config: LabConfig) -> None:
    logging.basicConfig(
        level=getattr(logging, config.log_level, logging.INFO),
        format=config.log_format,
        handlers=[logging.StreamHandler()],
        force=True,
    )


def _parse_values(text: str) -> list[int | float | str]:
    values = [ValidationUtils.parse_scalar(item) for item in text.split(",") if item.strip()]
    if not values:
        raise ConfigurationError("--values: no values given", field="values")
    return values


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    try:
        config = LabConfig.from_environment()
        if args.log_level:
            config.log_level = args.log_level
        config.validate()
    except ValueError as e:
        print(e, file=sys.stderr)
        return EXIT_ERROR
    _configure_logging(config)
    set_config(config)
    logger.info(f"Starting {config.lab_name} v{config.lab_version}")

    runner = ScenarioRunner(config)
    plots = True if args.plots else None
    try:
        scenario = load_scenario(args.config)
        if args.seed is not None:
            scenario = scenario.with_seed(args.seed)
        if args.command == "run":
            runner.run(scenario, args.out, plots)
        else:
            runner.sweep(scenario, args.param, _parse_values(args.values), args.out, plots)
    except BoundViolationError as e:
        logger.error(f"Bound violation: {e}")
        return EXIT_VIOLATION
    except ConfigurationError as e:
        where = f" (line {e.line})" if e.line else ""
        where += f" [{e.field}]" if e.field else ""
        logger.error(f"Invalid scenario{where}: {e}")
        return EXIT_ERROR
    except (TDSELabError, ValueError, OSError) as e:
        logger.error(f"Run failed: {e}")
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.info("Run interrupted by user")
        return EXIT_ERROR
    return EXIT_OK


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
