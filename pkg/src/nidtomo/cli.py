"""Command-line driver for the reconstruction experiments.

Subcommands: ``phantom``, ``simulate``, ``reconstruct``, ``metrics``,
``plot-flux``.  All take ``--config`` (TOML), ``--seed``, ``--out`` and
repeatable ``--override section.key=value`` flags.  Exit codes: 0 success,
2 configuration error, 3 dimension mismatch, 4 line-search failure,
5 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, apply_override, default_config, load_config_file, resolve
from .grids import DimensionError
from .optimize import LineSearchError
from .pipeline import run_metrics, run_phantom, run_plot_flux, run_reconstruct, run_simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIMENSION = 3
EXIT_LINESEARCH = 4
EXIT_IO = 5

_COMMANDS = {
    "phantom": run_phantom,
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "metrics": run_metrics,
    "plot-flux": run_plot_flux,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nidtomo",
        description="Tomographic reconstruction with diffusion-based regularization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("phantom", "write the head phantom image files"),
        ("simulate", "project the phantom and write clean/noisy sinograms"),
        ("reconstruct", "run the configured reconstruction method"),
        ("metrics", "recompute quality metrics for an existing reconstruction"),
        ("plot-flux", "tabulate and plot the configured flux functions"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="TOML experiment configuration (or a manifest)")
        cmd.add_argument("--seed", type=int, help="override the noise seed")
        cmd.add_argument("--out", help="override the output directory")
        cmd.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path configuration override (repeatable)",
        )
    return parser


def load_experiment(args):
    cfg = load_config_file(args.config) if args.config else default_config()
    for assignment in args.override:
        apply_override(cfg, assignment)
    if args.seed is not None:
        cfg["noise"]["seed"] = args.seed
    if args.out is not None:
        cfg["run"]["out"] = args.out
    return resolve(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = load_experiment(args)
        out = _COMMANDS[args.command](exp)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionError as err:
        print(f"dimension error: {err}", file=sys.stderr)
        return EXIT_DIMENSION
    except LineSearchError as err:
        print(f"line-search failure: {err} (partial trace persisted)", file=sys.stderr)
        return EXIT_LINESEARCH
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.command}: outputs written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
