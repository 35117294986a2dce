# -*- coding: utf-8 -*-
"""Command-line entry point: ``lowmix simulate|converge|analyze``

Exit codes are 0 on success, 2 for an invalid configuration, 3 when a
linear solve fails and 4 when a non-finite value is detected.
"""

import argparse as _argparse
import glob as _glob
import logging as _logging
import os as _os
import sys as _sys
from typing import List as _List
from typing import Optional as _Optional
from typing import Sequence as _Sequence

import numpy as np
from attrs import evolve

from lowmix import __version__
from lowmix import config as _runtime
from lowmix._common import get_logger as _get_logger
from lowmix.analysis import column_structure_factor as _column_structure_factor
from lowmix.analysis import fit_correlations as _fit_correlations
from lowmix.analysis import table_name as _table_name
from lowmix.analysis import time_correlation as _time_correlation
from lowmix.analysis import vertical_average as _vertical_average
from lowmix.analysis import write_correlation_csv as _write_correlation_csv
from lowmix.analysis import write_fit_csv as _write_fit_csv
from lowmix.analysis import write_spectrum_csv as _write_spectrum_csv
from lowmix.convergence import convergence_study as _convergence_study
from lowmix.convergence import write_convergence_csv as _write_convergence_csv
from lowmix.exceptions import ConfigError as _ConfigError
from lowmix.exceptions import LowMixError as _LowMixError
from lowmix.exceptions import NonFiniteError as _NonFiniteError
from lowmix.exceptions import SolverError as _SolverError
from lowmix.grid import CellField as _CellField
from lowmix.scenarios import load_config as _load_config
from lowmix.scenarios import run_scenario as _run_scenario
from lowmix.snapshots import read_snapshot as _read_snapshot

__all__ = ["EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_NONFINITE", "build_parser", "main"]

_logger = _get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NONFINITE = 4


def _levels(text: str) -> _List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as err:
        raise _argparse.ArgumentTypeError(f"invalid levels {text!r}, should be comma separated integers") from err


def build_parser() -> _argparse.ArgumentParser:
    parser = _argparse.ArgumentParser(prog="lowmix", description="Low Mach number fluctuating hydrodynamics of mixtures")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true", help="log solver iterations")
    noise.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run a scenario")
    simulate.add_argument("config", help="scenario file")
    simulate.add_argument("--desk", action="store_true", help="use the reduced desk-scale preset values")
    simulate.add_argument("--seed", type=int, default=None, help="override the noise seed")
    simulate.add_argument("--output", default=None, help="output directory")

    converge = commands.add_parser("converge", help="self-convergence study of a scenario")
    converge.add_argument("config", help="scenario file")
    converge.add_argument("--levels", type=_levels, default=[64, 128, 256], help="cells along x per level")
    converge.add_argument("--variables", default="u,v,c", help="comma separated subset of u,v,c,rho")
    converge.add_argument("--output", default=None, help="output directory")

    analyze = commands.add_parser("analyze", help="spectra and correlations of saved concentration snapshots")
    analyze.add_argument("pattern", help="glob matching concentration snapshots")
    analyze.add_argument("--window", type=float, default=None, help="averaging window length in time units")
    analyze.add_argument("--lags", type=int, default=0, help="largest correlation lag in samples")
    analyze.add_argument("--oscillatory-modes", type=int, default=4)
    analyze.add_argument("--output", default=".", help="output directory")
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = _logging.WARNING if quiet else (_logging.DEBUG if verbose else _logging.INFO)
    _logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    _runtime.set_verbose(verbose)


def _simulate(args: _argparse.Namespace) -> None:
    config = _load_config(args.config, desk=args.desk)
    if args.seed is not None:
        config = evolve(config, noise=evolve(config.noise, seed=args.seed))
    result = _run_scenario(config, args.output)
    for path in result.files:
        _logger.debug("wrote %s", path)
    print(f"{config.scenario.name}: {result.run.steps} steps, summary in {result.files[-1]}")


def _converge(args: _argparse.Namespace) -> None:
    config = _load_config(args.config)
    variables = [name.strip() for name in args.variables.split(",") if name.strip()]
    table = _convergence_study(config, args.levels, variables)
    directory = args.output or config.output.directory
    path = _write_convergence_csv(_os.path.join(directory, "convergence.csv"), table)
    print(table.format("Linf"))
    _logger.info("convergence table written to %s", path)


def _analyze(args: _argparse.Namespace) -> None:
    paths = sorted(_glob.glob(args.pattern))
    if len(paths) < 2:
        raise _ConfigError(f"pattern {args.pattern!r} matches {len(paths)} snapshots, need at least 2")
    snapshots = [_read_snapshot(path) for path in paths]
    snapshots.sort(key=lambda snapshot: snapshot.time)
    if not all(isinstance(snapshot.field, _CellField) for snapshot in snapshots):
        raise _ConfigError("analyze needs cell-centred concentration snapshots")
    times = np.array([snapshot.time for snapshot in snapshots])
    if args.window is not None:
        snapshots = [s for s, t in zip(snapshots, times) if t <= times[0] + args.window]
        times = times[: len(snapshots)]

    grid = snapshots[0].grid
    columns = [_vertical_average(snapshot.field) for snapshot in snapshots]  # type: ignore[arg-type]
    window = float(times[-1] - times[0])
    spectrum = _column_structure_factor(columns, grid.dx, grid.dx * grid.lengths[1] * grid.dz_thickness, times)
    written = [_write_spectrum_csv(_os.path.join(args.output, _table_name("spectrum", times[-1], window)), spectrum)]
    if args.lags:
        dt = window / (len(times) - 1)
        correlation = _time_correlation(np.array(columns), args.lags, None, dt, grid.dx)
        name = _table_name("correlation", times[-1], window)
        written.append(_write_correlation_csv(_os.path.join(args.output, name), correlation))
        fits = _fit_correlations(correlation, args.oscillatory_modes)
        written.append(_write_fit_csv(_os.path.join(args.output, _table_name("fits", times[-1], window)), correlation, fits))
    for path in written:
        print(path)


_COMMANDS = {"simulate": _simulate, "converge": _converge, "analyze": _analyze}


def main(argv: _Optional[_Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        _COMMANDS[args.command](args)
    except _ConfigError as err:
        _logger.error("%s", err)
        return EXIT_CONFIG
    except _SolverError as err:
        _logger.error("%s (after %d iterations)", err, err.iterations)
        return EXIT_SOLVER
    except _NonFiniteError as err:
        _logger.error("%s", err)
        return EXIT_NONFINITE
    except _LowMixError as err:
        _logger.error("%s", err)
        return EXIT_SOLVER
    except OSError as err:
        _logger.error("%s", err)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    _sys.exit(main())
