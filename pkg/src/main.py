#!/usr/bin/env python3
"""ssmkit - analytical surrogate safety measures for rolling-horizon collision prediction."""

import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from src.collision import EvaluationMethod
from src.errors import EXIT_OK, AcceptanceFailure, SsmError, exit_code_for
from src.scenario import SCHEMA_TEXT, Scenario, bundled_scenario, bundled_scenario_names, load_scenario_file

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=logging.INFO,
)
logger = logging.getLogger(__name__)

# Environment key -> (config key, parser, default)
ENV_KEYS = {
    "SSM_HORIZON": ("horizon", float, "20"),
    "SSM_SCAN_STEP": ("scan_step", float, "0.01"),
    "SSM_EVAL_PERIOD": ("period", float, "0.1"),
    "SSM_ORACLE_STEP": ("oracle_step", float, "0.001"),
    "SSM_ORACLE_STEPS": ("oracle_steps", int, "6000"),
}


def load_config() -> dict:
    """Load configuration from environment variables."""
    load_dotenv()

    config = {}
    for env_key, (key, parse, default) in ENV_KEYS.items():
        raw = os.getenv(env_key, default).strip()
        try:
            value = parse(raw)
        except ValueError:
            logger.error(f"{env_key} must be a number, got {raw!r}")
            sys.exit(1)
        if not value > 0:
            logger.error(f"{env_key} must be positive, got {raw!r}")
            sys.exit(1)
        config[key] = value

    config["output_dir"] = os.path.expanduser(os.getenv("SSM_OUTPUT_DIR", "out"))

    log_level = os.getenv("SSM_LOG_LEVEL", "INFO").upper()
    if not isinstance(logging.getLevelName(log_level), int):
        logger.error(f"SSM_LOG_LEVEL {log_level!r} is not a logging level")
        sys.exit(1)
    config["log_level"] = log_level
    return config


def _scenario(value: str) -> Scenario:
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(value)
    if path.suffix == ".cfg" or path.exists():
        return load_scenario_file(path)
    return bundled_scenario(value)


def _positive(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None
    if not number > 0:
        raise argparse.ArgumentTypeError(f"{value!r} must be positive")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssmkit",
        description="Analytical time-to-collision for kinematic and force-balance vehicle models",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Evaluate a scenario on a rolling horizon")
    run_parser.add_argument(
        "--scenario",
        required=True,
        action="append",
        help=f"Scenario file or bundled name ({', '.join(bundled_scenario_names())}); repeatable",
    )
    run_parser.add_argument("--method", choices=[method.value for method in EvaluationMethod])
    run_parser.add_argument("--out", help="Output directory (default: SSM_OUTPUT_DIR)")
    run_parser.add_argument("--horizon", type=_positive, help="Analytic horizon in seconds")
    run_parser.add_argument("--scan-step", type=_positive, help="Coarse bracket width in seconds")

    verify_parser = commands.add_parser("verify", help="Check the bundled experiments")
    verify_parser.add_argument(
        "--only", action="append", help="Restrict to one bundled experiment; repeatable"
    )

    commands.add_parser("schema", help="Print the scenario file format")
    return parser


def command_run(args: argparse.Namespace, config: dict) -> int:
    # Deferred so that 'schema' does not load matplotlib
    from src.emit import emit_record
    from src.runner import run

    out_dir = Path(args.out or config["output_dir"])
    method = EvaluationMethod(args.method) if args.method else None
    scenarios = [_scenario(value) for value in args.scenario]
    for scenario in scenarios:
        record = run(
            scenario,
            method,
            horizon=args.horizon,
            scan_step=args.scan_step,
            defaults=config,
        )
        for path in emit_record(record, scenario, out_dir):
            print(path)
    return EXIT_OK


def command_verify(args: argparse.Namespace, config: dict) -> int:
    from src.acceptance import verify

    try:
        results = verify(config, args.only)
    except AcceptanceFailure as e:
        for check in e.results:
            print(check)
        raise
    for check in results:
        print(check)
    print(f"All {len(results)} acceptance checks passed")
    return EXIT_OK


def command_schema(args: argparse.Namespace, config: dict) -> int:
    print(SCHEMA_TEXT, end="")
    return EXIT_OK


COMMANDS = {"run": command_run, "verify": command_verify, "schema": command_schema}


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    config = load_config()
    logging.getLogger().setLevel(config["log_level"])

    try:
        return COMMANDS[args.command](args, config)
    except (SsmError, ArithmeticError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return exit_code_for(e)
    except KeyboardInterrupt:
        logger.info("Received interrupt signal, exiting...")
        return 130


if __name__ == "__main__":
    sys.exit(main())
