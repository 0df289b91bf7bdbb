"""
Command Line Driver
young-taylor run --config FILE [--threads N] [--out DIR] [--plot]
young-taylor validate --config FILE
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from config import LOG_LEVEL, OUTPUT_DIR, OUTPUT_DIR_ENV, set_thread_limit
from errors import ConfigError, ExpansionError
from experiments import resolve_output_dir, run_experiment
from exporters import ArtifactWriter
from schemas import load_config

logger = logging.getLogger(__name__)


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="young-taylor",
        description="Taylor and Lie-series expansions of equations driven by Hölder paths.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    run.add_argument("--out", type=Path, default=None, help=f"output directory (env {OUTPUT_DIR_ENV})")
    run.add_argument("--plot", action="store_true", help="also write PNG plots")

    validate = commands.add_parser("validate", help="check a config file without running it")
    validate.add_argument("--config", type=Path, required=True)
    return parser.parse_args(argv)


def _describe(error: ExpansionError) -> str:
    line = getattr(error, "line", None)
    if line is not None:
        return f"{error} (line {line}, column {error.column})"
    return str(error)


def _fallback_out(out: Optional[Path]) -> Path:
    if out is not None:
        return out
    return Path(os.getenv(OUTPUT_DIR_ENV) or OUTPUT_DIR)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as err:
        print(f"invalid config: {_describe(err)}", file=sys.stderr)
        return 2
    print(json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    if args.threads is not None:
        try:
            set_thread_limit(args.threads)
        except ValueError as err:
            print(str(err), file=sys.stderr)
            return 2

    try:
        config = load_config(args.config)
    except ConfigError as err:
        logger.error("Invalid config %s: %s", args.config, _describe(err))
        ArtifactWriter(_fallback_out(args.out)).error("config", err)
        return 2

    if args.plot:
        config = config.model_copy(update={"plot": True})
    out_dir = resolve_output_dir(config, str(args.out) if args.out else None)
    try:
        manifest = run_experiment(config, out_dir)
    except ExpansionError as err:
        logger.error("Experiment '%s' failed: %s", config.experiment, err)
        return 1
    except Exception:
        logger.exception("Experiment '%s' failed unexpectedly", config.experiment)
        return 1
    logger.info("Experiment '%s' wrote %d files to %s", config.experiment, len(manifest["outputs"]), out_dir)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = _parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_run(args)


if __name__ == "__main__":
    raise SystemExit(main())
