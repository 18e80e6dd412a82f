"""Command-line entry point: ``adasense run|sweep-adaptivity|sweep-samples|bench``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import (
    ExperimentConfig,
    cmd_bench,
    cmd_run,
    cmd_sweep_adaptivity,
    cmd_sweep_samples,
    resolve_threads,
    summarize,
    with_overrides,
)
from .errors import AdaSenseError, ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

COMMANDS = {
    "run": cmd_run,
    "sweep-adaptivity": cmd_sweep_adaptivity,
    "sweep-samples": cmd_sweep_samples,
    "bench": cmd_bench,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adasense", description="Adaptive compressed sensing experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", required=True, help="experiment JSON config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--trials", type=int, default=None, help="override config trial count")
        p.add_argument("--threads", type=int, default=None, help="worker threads (fallback: ADASENSE_THREADS)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _print_summary(rows) -> None:
    for item in summarize(rows):
        print(
            f"{item['strategy']:<32} N={item['N']:<3} r={item['r']:<3} s={item['s']:<4} "
            f"mse={item['mean_mse']:.6g} +- {item['stderr_mse']:.2g}  ok={item['n_ok']}/{item['trials']}"
        )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = with_overrides(ExperimentConfig.load(args.config), seed=args.seed, trials=args.trials)
        threads = resolve_threads(args.threads, cfg.threads)
        rows = COMMANDS[args.command](cfg, args.out, threads)
    except ConfigError as exc:
        print(f"adasense: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AdaSenseError, OSError, ValueError) as exc:
        print(f"adasense: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
