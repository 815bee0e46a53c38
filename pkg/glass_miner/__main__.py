#!/usr/bin/env python3
"""
Command-line entry point for the glass patent miner.

Examples:
    python -m glass_miner --config pipeline.json --stage all
    python -m glass_miner --config pipeline.json --stage filter --chunk-size 50000
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import FetchPolicy, PipelineConfig
from .exceptions import ConfigurationError
from .pipeline import ALL, EXIT_CONFIG, STAGES, run_stage


def create_parser() -> argparse.ArgumentParser:
    """Create command-line argument parser."""
    parser = argparse.ArgumentParser(
        description="Glass composition-property mining from patent tables",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:

  # Whole pipeline over the offline corpus
  python -m glass_miner --config pipeline.json --stage all --offline

  # One stage with a different chunk size and output directory
  python -m glass_miner --config pipeline.json --stage filter --chunk-size 50000 --out runs/b
        """
    )

    parser.add_argument(
        "--config", "-c",
        type=str,
        help="Pipeline configuration JSON (default: built-in defaults)"
    )

    parser.add_argument(
        "--stage", "-s",
        choices=list(STAGES) + [ALL],
        default=ALL,
        help="Stage to run (default: all)"
    )

    override_group = parser.add_argument_group("Configuration overrides")

    override_group.add_argument(
        "--chunk-size",
        type=int,
        help="Rows per processed chunk"
    )

    override_group.add_argument(
        "--offline",
        action="store_true",
        help="Never fetch; read patent pages from the corpus only"
    )

    override_group.add_argument(
        "--out", "-o",
        type=str,
        help="Output directory"
    )

    output_group = parser.add_argument_group("Output parameters")

    output_group.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Enable verbose logging"
    )

    output_group.add_argument(
        "--quiet", "-q",
        action="store_true",
        help="Only log errors"
    )

    output_group.add_argument(
        "--print-config",
        action="store_true",
        help="Print the effective configuration as JSON and exit"
    )

    return parser


def create_config_from_args(args) -> PipelineConfig:
    """
    Build the configuration: defaults, then the config file, then CLI flags.

    Raises:
        ConfigurationError: On invalid files or values
    """
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.chunk_size is not None:
        config.filter = replace(config.filter, chunk_size=args.chunk_size)
    if args.offline:
        config.fetch_policy = FetchPolicy.OFFLINE_ONLY
    if args.out:
        config.output_dir = args.out
    return config


def main():
    """Main entry function."""
    parser = create_parser()
    args = parser.parse_args()

    # The library never configures global logging
    log_level = logging.DEBUG if args.verbose else (logging.ERROR if args.quiet else logging.INFO)
    logging.basicConfig(level=log_level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    logging.getLogger('glass_miner').setLevel(log_level)

    try:
        config = create_config_from_args(args)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.print_config:
        print(json.dumps(config.to_dict(), indent=2, ensure_ascii=False))
        return 0

    logging.getLogger(__name__).debug(f"Effective configuration: {config}")
    status, reports = run_stage(args.stage, config)

    if not args.quiet:
        for report in reports:
            drops = ", ".join(f"{k}={v}" for k, v in report.drops.items()) or "none"
            print(f"{report.stage}: {report.rows_in} in, {report.rows_out} out, drops: {drops}")
    return status


if __name__ == "__main__":
    sys.exit(main())
