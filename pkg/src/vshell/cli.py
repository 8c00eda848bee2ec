"""Command line entry point: ``vshell <command> --config <path> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, is_dataclass

from . import __version__
from .dynamics import kernels
from .errors import VShellError
from .experiments import COMMANDS, RUNNERS, load_config, with_seed

EXIT_OK = 0
EXIT_CONFIG = 2

log = logging.getLogger("vshell")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vshell", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vshell {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for the particle kernels")
    return parser


def _setup_logging():
    level = os.environ.get("VSHELL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _summary(result):
    if is_dataclass(result):
        return asdict(result)
    if isinstance(result, list):
        return [_summary(r) for r in result]
    return result


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is the config-error code
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    kernels.set_threads(args.threads)
    try:
        cfg = with_seed(load_config(args.config), args.seed)
        result = RUNNERS[args.command](cfg, args.out)
    except VShellError as exc:
        print(f"error: {exc.reason}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(_summary(result), default=str, indent=1))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
