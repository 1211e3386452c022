"""Command-line entry point.

Subcommands: ``fit-direct`` (lower tier only), ``continual`` (full task
sequence), ``emulate`` (fixed-point solve and cost report), ``gen-data``
(write the synthetic stream to CSV), ``validate`` (check a config and
exit).  ``--replicas N`` fans a run out over N seed variants (base seed,
base seed + 1, ...), each in its own subdirectory, running concurrently.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError
from .runner import make_run_dir, run_emulate, run_experiment, run_fit_direct, run_gen_data

_RUNNERS = {
    "fit-direct": run_fit_direct,
    "continual": run_experiment,
    "emulate": run_emulate,
    "gen-data": run_gen_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twotier",
        description="Two-tier learner: closed-form lower tier, consolidated incremental head.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit-direct", "fit the lower tier in one pass and report readout accuracy"),
        ("continual", "run the full continual-learning pipeline"),
        ("emulate", "run the fixed-point solve emulation and cost report"),
        ("gen-data", "write the configured synthetic task stream to CSV files"),
        ("validate", "validate a config file and exit"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None, help="JSON config path (defaults apply if omitted)")
        cmd.add_argument("--out", type=Path, default=None, help="output directory (default: timestamped)")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--replicas", type=int, default=1, help="run N seed variants concurrently")
        cmd.add_argument("--quiet", action="store_true", help="suppress console output")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _run_one(command: str, cfg: ExperimentConfig, out, quiet: bool):
    return _RUNNERS[command](cfg, out=out, quiet=quiet)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        if not args.quiet:
            print(f"config ok (seed={cfg.seed}, stream={cfg.stream_kind}, h={cfg.h}, k={cfg.k})")
        return 0

    if args.replicas < 1:
        print("error: --replicas must be at least 1", file=sys.stderr)
        return 1

    try:
        if args.replicas == 1:
            _run_one(args.command, cfg, args.out, args.quiet)
            return 0
        base = make_run_dir(args.out, cfg.seed) if args.out is not None else Path(".")
        futures = []
        with ProcessPoolExecutor(max_workers=min(args.replicas, 8)) as pool:
            for i in range(args.replicas):
                seed = (cfg.seed + i) % 2**64
                replica_cfg = dataclasses.replace(cfg, seed=seed)
                out = base / f"replica-{i:02d}-seed{seed}"
                futures.append(pool.submit(_run_one, args.command, replica_cfg, out, True))
            for future in futures:
                future.result()
        if not args.quiet:
            print(f"{args.replicas} replicas complete")
        return 0
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
