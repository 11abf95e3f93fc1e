"""Command-line entry point: ``helix <experiment> --config PATH``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import EXPERIMENTS, run_experiment, write_csv

log = logging.getLogger("helix")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helix", description="Stochastic induction equation experiments.")
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", required=True, type=Path, help="flat key = value configuration file")
    ap.add_argument("--seed", type=int, help="override base_seed")
    ap.add_argument("--paths", type=int, help="override the Monte-Carlo path count M")
    ap.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config).with_overrides(base_seed=args.seed, M=args.paths)
        if not 0 <= cfg.base_seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if cfg.M < 1:
            raise ConfigError("--paths must be >= 1")
        result = run_experiment(args.experiment, cfg)
    except ConfigError as e:
        log.error("configuration error: %s", e)
        return 2

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(result, fh)
    else:
        write_csv(result, sys.stdout)
    for c in result.checks:
        log.info("%s %s: %s", "PASS" if c.passed else "FAIL", c.name, c.detail)
    for k, v in result.timing.items():
        log.info("time %s: %.2f s", k, v)
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
