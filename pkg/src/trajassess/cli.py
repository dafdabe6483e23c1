"""Command-line entry point: run the full assessment pipeline on one dataset."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .core import ConfigError, DataError
from .ingestion import load_config
from .report import export, run_pipeline

log = logging.getLogger("trajassess")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assess",
        description="Compute complexity indicators for a trajectory dataset.",
    )
    parser.add_argument("--config", required=True, help="JSON pipeline configuration")
    parser.add_argument(
        "--indicators",
        default="all",
        help="comma-separated subset: all,overall,predictability,regularity,context",
    )
    parser.add_argument("--out", default="assessment_out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--stride", type=float, default=None,
                        help="override the trajlet stride (seconds)")
    parser.add_argument("--exact", action="store_true",
                        help="disable pruning/neighborhood shortcuts")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("TRAJASSESS_LOG_LEVEL", "WARNING" if args.quiet else "INFO")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config)
        report = run_pipeline(
            config,
            base_dir=Path(args.config).parent,  # data paths relative to the config
            indicators=args.indicators,
            seed=args.seed,
            stride=args.stride,
            exact=args.exact,
        )
        files = export(report, args.out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL

    if not args.quiet:
        meta = report.metadata
        print(f"{meta['name']}: {meta['n_agents']} agents, "
              f"{meta['n_trajlets']} trajlets "
              f"({meta['non_static_fraction']:.1%} non-static)")
        for f in files:
            print(f"wrote {f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
