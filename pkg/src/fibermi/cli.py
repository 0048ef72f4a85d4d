"""Command-line interface.

Exit codes: 0 success, 2 configuration errors, 3 physics-constraint
violations, 4 numeric failures (diverged ensembles), 1 anything unexpected.
The FIBERMI_THREADS environment variable overrides --threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import traceback
from pathlib import Path

from .config import ConfigError, apply_overrides, load_config
from .core import PhysicsError
from .engine import DivergenceError
from .scenarios import run_scenario, run_sweep

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_NUMERIC = 4

THREADS_ENV = "FIBERMI_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibermi",
        description="Stochastic nonlinear Schrodinger simulator for "
        "modulation-instability spectra in optical fiber.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run every configured fiber length of a scenario"),
        ("sweep", "run the scenario's [sweep] parameter scan"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("config", type=Path, help="scenario file (text or .json)")
        cmd.add_argument("--out", type=Path, default=Path("out"),
                         help="output directory (default: ./out)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="master seed override")
        cmd.add_argument("--realizations", type=int, default=None,
                         help="ensemble size override")
        cmd.add_argument("--threads", type=int, default=1,
                         help=f"worker threads (env {THREADS_ENV} overrides)")
        cmd.add_argument("--no-plots", action="store_true",
                         help="skip figure rendering")
        cmd.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_threads(flag_value: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    if flag_value < 1:
        raise ConfigError(f"--threads must be >= 1, got {flag_value}")
    return flag_value


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(message)s")
    # Scope verbosity to our logger; DEBUG on the root floods the console
    # with matplotlib font-matching chatter.
    logging.getLogger("fibermi").setLevel(
        logging.DEBUG if args.verbose else logging.INFO
    )
    try:
        threads = _resolve_threads(args.threads)
        cfg = load_config(args.config, expect_sweep=args.command == "sweep")
        cfg = apply_overrides(
            cfg,
            seed=args.seed,
            realizations=args.realizations,
            plots=False if args.no_plots else None,
        )
        if args.command == "run":
            result = run_scenario(cfg, args.out, threads=threads)
            for length in result.lengths:
                print(result.csv_paths[length])
            print(result.manifest_path)
        else:
            result = run_sweep(cfg, args.out, threads=threads)
            print(result.summary_path)
            print(result.manifest_path)
        return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as err:
        print(f"physics constraint violated: {err}", file=sys.stderr)
        return EXIT_PHYSICS
    except DivergenceError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
