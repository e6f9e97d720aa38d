"""Command-line driver.

Subcommands: propagate | ldos | theory | fit | collapse | figure.
Options mirror the flat config keys; --config loads a key=value file
which explicit flags then override.  Exit codes: 0 success, 2 config
error, 3 numerical-budget error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, NumericalBudgetError
from .figures import FIGURE_IDS, emit_figure
from .runio import parse_config_text, run_experiment

_MODEL_KEYS = [
    ("--model", "model", "fm or wm"),
    ("--s", "s", "spectral exponent"),
    ("--eps", "eps", "coupling strength"),
    ("--omega-c", "omega_c", "cutoff frequency"),
    ("--b", "b", "bandwidth in level spacings (alternative to --omega-c)"),
    ("--rho", "rho", "density of states (default 1)"),
    ("--cutoff", "cutoff", "sharp or exponential"),
    ("--half-size", "half_size", "levels on each side of the prepared one"),
    ("--realizations", "realizations", "ensemble size"),
    ("--tmax", "tmax", "grid end; plain number or suffixed like 5t0 / 80tc"),
    ("--tpoints", "tpoints", "number of grid times"),
    ("--tgrid", "tgrid", "linear or log"),
    ("--master-seed", "master_seed", "seed of the realization-seed sequence"),
    ("--method", "method", "eigen or rk4"),
    ("--average-mode", "average_mode", "profile or per_realization"),
    ("--workers", "workers", "parallel realization workers"),
    ("--core-bins", "core_bins", "uniform bins across the core"),
    ("--tail-bins-per-decade", "tail_bins_per_decade", "log bins density"),
    ("--steps-per-scale", "steps_per_scale", "rk4 steps per shortest scale"),
]


def _add_experiment_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", type=Path, help="key = value file; flags override")
    p.add_argument("--out", required=True, type=Path, help="run directory")
    for flag, dest, help_str in _MODEL_KEYS:
        p.add_argument(flag, dest=dest, help=help_str)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdecay",
        description="Decay of a prepared state into a non-flat continuum",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_experiment_parser(sub, "propagate", "ensemble time evolution -> series.csv")
    _add_experiment_parser(sub, "ldos", "ensemble line shape -> ldos_*.csv")
    _add_experiment_parser(sub, "theory", "closed-form tracks -> theory.csv")

    fit = sub.add_parser("fit", help="fit decay laws to a series.csv")
    fit.add_argument("--series", required=True)
    fit.add_argument("--window-lo", dest="window_lo", required=True)
    fit.add_argument("--window-hi", dest="window_hi", required=True)
    fit.add_argument("--departure-fraction", dest="departure_fraction")
    fit.add_argument("--out", required=True, type=Path)

    col = sub.add_parser("collapse", help="scaling collapse of several series")
    col.add_argument("--series", required=True, help="';'-separated series.csv paths")
    col.add_argument("--window-lo", dest="window_lo")
    col.add_argument("--window-hi", dest="window_hi")
    col.add_argument("--out", required=True, type=Path)

    fig = sub.add_parser("figure", help="render a figure from run outputs")
    fig.add_argument("--run", required=True, type=Path, help="run directory")
    fig.add_argument("--id", required=True, choices=FIGURE_IDS)
    fig.add_argument("--out", type=Path)
    fig.add_argument("--inputs", nargs="*", help="extra series.csv files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            path = emit_figure(args.run, args.id, args.out, args.inputs)
            print(path)
            return 0
        config = {}
        if getattr(args, "config", None):
            config.update(parse_config_text(args.config.read_text()))
        for _, dest, _h in _MODEL_KEYS + [
            ("--series", "series", ""),
            ("--window-lo", "window_lo", ""),
            ("--window-hi", "window_hi", ""),
            ("--departure-fraction", "departure_fraction", ""),
        ]:
            val = getattr(args, dest, None)
            if val is not None:
                config[dest] = val
        config["command"] = args.command
        run_dir = run_experiment(config, args.out)
        print(run_dir)
        return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except NumericalBudgetError as exc:
        print(f"numerical budget error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
