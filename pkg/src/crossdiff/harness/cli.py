"""Command-line entry point.

    crossdiff <simulate|solve|compare|diagnose|sweep>
              --config cfg.json [--out-dir DIR] [--seed S] [--threads N] [--plot]
"""
from __future__ import annotations

import argparse
import sys

from .commands import cmd_compare, cmd_diagnose, cmd_simulate, cmd_solve, cmd_sweep
from .config import ConfigError, ExperimentConfig

_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdiff",
        description="Particle ensembles and the limiting cross-diffusion system "
                    "for two-type reflecting Brownian motions on the circle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0].lower())
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--out-dir", default=None,
                        help="output directory (default: outputs.directory)")
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed override (default: config seed)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker processes for replicas")
        sp.add_argument("--plot", action="store_true", default=None,
                        help="also write SVG charts")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out_dir if args.out_dir is not None else cfg.outputs["directory"]
    try:
        _COMMANDS[args.command](cfg, out_dir, master_seed=args.seed,
                                threads=args.threads, plot=args.plot)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
