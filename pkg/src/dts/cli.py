"""Command line entry point.

    dts <stage> --config <file> [--seed N] [--threads K|det] [--force]
                [--top-k-headers K]

Stages: synth ingest graph train-kge train-gatne index recall carousels
eval. Set DTS_LOG (debug|info|warning|error) to control verbosity. Exit
codes: 0 ok, 2 config error, 3 missing artifact, 4 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DataError, MissingArtifactError
from .pipeline import STAGE_NAMES, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_DATA = 4


def _setup_logging() -> None:
    level = os.environ.get("DTS_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dts",
        description="Aspect-grounded recommendation carousel pipeline")
    parser.add_argument("stage", choices=STAGE_NAMES, help="pipeline stage to run")
    parser.add_argument("--config", required=True, type=Path,
                        help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the global seed")
    parser.add_argument("--threads", default=None,
                        help="worker count, or 'det' for the deterministic single worker")
    parser.add_argument("--force", action="store_true",
                        help="proceed despite a config-hash mismatch with existing artifacts")
    parser.add_argument("--top-k-headers", type=int, default=None, metavar="K",
                        help="emit the top-K ranked headers per anchor (carousels stage)")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed, threads=args.threads)
        record = run_stage(args.stage, config, force=args.force,
                           top_k_headers=args.top_k_headers)
    except ConfigError as exc:
        print(f"dts: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"dts: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except DataError as exc:
        print(f"dts: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for key, value in sorted(record["counters"].items()):
        print(f"{args.stage}: {key} = {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
