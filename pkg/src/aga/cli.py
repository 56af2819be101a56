"""Command-line entry point: ``aga generate|track|evaluate|sweep``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import harness
from .dataset_io import FormatError
from .scenario_gen import KINDS

EXIT_CODES = {
    "ConfigError": 2,
    "FormatError": 3,
    "VersionError": 3,
    "MalformedRLEError": 3,
    "MissingVideosError": 4,
    "OSError": 5,
}


def _kinds(value: str) -> tuple[str, ...]:
    if value == "both":
        return KINDS
    if value not in KINDS:
        raise argparse.ArgumentTypeError("kind must be track, swap or both")
    return (value,)


def _u64(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment config")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--seed", type=_u64, help="suite seed (overrides config)")
    common.add_argument("--variant", help="comma-separated variant names")
    common.add_argument("--kind", type=_kinds, default=KINDS, help="track|swap|both")

    parser = argparse.ArgumentParser(prog="aga", description="Appearance-guided association experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="write a synthetic benchmark suite")
    gen.add_argument("--num", type=int, help="videos per selected kind")
    gen.add_argument("--frames", type=int, help="frames per video")

    trk = sub.add_parser("track", parents=[common], help="run tracker variants over a suite")
    trk.add_argument("--dataset", help="dataset directory (default OUT/dataset)")

    ev = sub.add_parser("evaluate", parents=[common], help="score track outputs against ground truth")
    ev.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
    ev.add_argument("--tracks", help="track output directory (default OUT/tracks)")

    sw = sub.add_parser("sweep", parents=[common], help="memory window sweep")
    sw.add_argument("--windows", default=",".join(map(str, harness.SWEEP_WINDOWS)))
    sw.add_argument("--num", type=int, help="videos per selected kind")
    sw.add_argument("--frames", type=int, help="frames per video")
    return parser


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    if args.out:
        cfg.out = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.seed is not None:
        cfg.suite.seed = args.seed
    if getattr(args, "num", None) is not None:
        cfg.suite.num_track_videos = args.num if "track" in args.kind else 0
        cfg.suite.num_swap_videos = args.num if "swap" in args.kind else 0
    if getattr(args, "frames", None) is not None:
        cfg.suite.scenario = replace(cfg.suite.scenario, frames=args.frames)
    harness.validate_config(cfg)
    return cfg


def _variant_names(args):
    return [v.strip() for v in args.variant.split(",") if v.strip()] if args.variant else None


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _apply_overrides(harness.load_config(args.config), args)
    names = _variant_names(args)
    if args.command == "generate":
        harness.cmd_generate(cfg, args.kind)
    elif args.command == "track":
        harness.cmd_track(cfg, args.dataset, names, args.kind)
    elif args.command == "evaluate":
        harness.cmd_evaluate(cfg.out, args.dataset, args.tracks, cfg.jobs, names, args.kind)
    elif args.command == "sweep":
        try:
            windows = [int(w) for w in args.windows.split(",")]
        except ValueError:
            raise harness.ConfigError(f"bad --windows value {args.windows!r}") from None
        harness.cmd_sweep(cfg, windows, args.kind)
    return 0


def main(argv=None) -> int:
    level = os.environ.get("AGA_LOG", "warn").upper()
    logging.basicConfig(
        level={"WARN": logging.WARNING}.get(level, getattr(logging, level, logging.WARNING)),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(argv)
    except (harness.ConfigError, FormatError, harness.MissingVideosError, OSError) as exc:
        name = type(exc).__name__
        code = EXIT_CODES.get(name, 5 if isinstance(exc, OSError) else 1)
        if isinstance(exc, OSError):
            name = "OSError"
        message = str(exc).replace("\n", " ")
        print(f"error: {name}: {message}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
