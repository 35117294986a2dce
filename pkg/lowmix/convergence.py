# -*- coding: utf-8 -*-
"""Self-convergence studies and dimensionless numbers

Errors are measured between successive refinements: the finer solution is
averaged down onto the coarser grid (cells over 2x2 blocks, faces over the
two fine faces covering a coarse face) and compared pointwise.
"""

import csv as _csv
import math as _math
import os as _os
from typing import TYPE_CHECKING
from typing import Dict as _Dict
from typing import List as _List
from typing import Optional as _Optional
from typing import Sequence as _Sequence
from typing import Union as _Union

import numpy as np
from attrs import define, field
from more_itertools import pairwise

from lowmix._common import get_logger as _get_logger
from lowmix.exceptions import GeometryError as _GeometryError
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.integrators import stability_numbers as _stability_numbers
from lowmix.mixture import FluidState as _FluidState
from lowmix.mixture import MixtureModel as _MixtureModel
from lowmix.mixture import eval_coefficients as _eval_coefficients

if TYPE_CHECKING:
    from lowmix.scenarios import ScenarioConfig

__all__ = [
    "NORMS",
    "VARIABLES",
    "PECLET_BDS_THRESHOLD",
    "DimensionlessReport",
    "ConvergenceTable",
    "average_down",
    "error_norms",
    "convergence_orders",
    "self_convergence",
    "convergence_study",
    "dimensionless_report",
    "write_convergence_csv",
]

_logger = _get_logger(__name__)

NORMS = ("Linf", "L1", "L2")
VARIABLES = ("u", "v", "c", "rho")
PECLET_BDS_THRESHOLD = 2.0

AnyField = _Union[_CellField, _FaceField]


# --- averaging and norms --------------------------------------------------------


def _check_pair(coarse: _Grid, fine: _Grid) -> None:
    if (fine.nx, fine.ny) != (2 * coarse.nx, 2 * coarse.ny) or (fine.bc_x, fine.bc_y) != (coarse.bc_x, coarse.bc_y):
        raise _GeometryError(f"grid {fine.nx}x{fine.ny} is not a factor-2 refinement of {coarse.nx}x{coarse.ny}")
    if not (_math.isclose(fine.dx * 2, coarse.dx) and _math.isclose(fine.dy * 2, coarse.dy)):
        raise _GeometryError("refined grid spacing does not halve the coarse spacing")


def average_down(fine: AnyField, coarse: _Grid) -> AnyField:
    """Restricts a field to a grid coarser by a factor of two"""
    _check_pair(coarse, fine.grid)
    if isinstance(fine, _CellField):
        v = fine.values
        return _CellField(coarse, 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2]))
    x = fine.x[0::2, :]
    y = fine.y[:, 0::2]
    return _FaceField(coarse, 0.5 * (x[:, 0::2] + x[:, 1::2]), 0.5 * (y[0::2, :] + y[1::2, :]))


def _arrays(item: AnyField) -> np.ndarray:
    if isinstance(item, _CellField):
        return item.values.ravel()
    return np.concatenate([item.x.ravel(), item.y.ravel()])


def error_norms(a: AnyField, b: AnyField) -> _Dict[str, float]:
    """Max, mean absolute and root-mean-square pointwise difference"""
    if a.grid != b.grid:
        raise _GeometryError("cannot compare fields on different grids")
    diff = _arrays(a) - _arrays(b)
    return {
        "Linf": float(np.abs(diff).max()),
        "L1": float(np.abs(diff).mean()),
        "L2": float(np.sqrt(np.mean(diff**2))),
    }


def convergence_orders(errors: _Sequence[float]) -> _List[float]:
    """``log2`` of the ratio of successive errors; NaN where an error vanishes"""
    orders = []
    for coarse, fine in pairwise(errors):
        if coarse > 0.0 and fine > 0.0:
            orders.append(_math.log2(coarse / fine))
        else:
            orders.append(_math.nan)
    return orders


def _component(item: AnyField, which: str) -> AnyField:
    if which in ("u", "v") and isinstance(item, _FaceField):
        grid = item.grid
        if which == "u":
            return _FaceField(grid, item.x, np.zeros_like(item.y))
        return _FaceField(grid, np.zeros_like(item.x), item.y)
    return item


@define
class ConvergenceTable:
    """Errors between successive levels and the resulting orders

    ``errors[variable][norm]`` has one entry per pair of levels, ``orders``
    one entry less.
    """

    levels: _List[int]
    errors: _Dict[str, _Dict[str, _List[float]]] = field(factory=dict)
    orders: _Dict[str, _Dict[str, _List[float]]] = field(factory=dict)

    def add(self, variable: str, norm: str, errors: _Sequence[float]) -> None:
        self.errors.setdefault(variable, {})[norm] = list(errors)
        self.orders.setdefault(variable, {})[norm] = convergence_orders(errors)

    def format(self, norm: str = "Linf") -> str:
        pairs = [f"{a}-{b}" for a, b in pairwise(self.levels)]
        lines = [f"{'':>6}" + "".join(f"{pair:>14}{'order':>8}" for pair in pairs)]
        for variable, by_norm in self.errors.items():
            errors = by_norm[norm]
            orders = self.orders[variable][norm] + [_math.nan]
            cells = "".join(
                f"{error:>14.3e}" + (f"{order:>8.2f}" if not _math.isnan(order) else f"{'':>8}")
                for error, order in zip(errors, orders)
            )
            lines.append(f"{variable:>6}" + cells)
        return "\n".join(lines)


def self_convergence(solutions: _Sequence[_Dict[str, AnyField]], levels: _Sequence[int]) -> ConvergenceTable:
    """Builds the error table of a sequence of solutions on successively refined grids

    Parameters
    ----------
    solutions : sequence of dict
        Per level, the fields by variable name (``u``, ``v``, ``c``, ``rho``).
    levels : sequence of int
        Resolution labels of the levels, coarsest first.
    """
    if len(solutions) != len(levels):
        raise ValueError("one set of fields is needed per level")
    table = ConvergenceTable(list(levels))
    variables = list(solutions[0])
    for variable in variables:
        per_norm: _Dict[str, _List[float]] = {norm: [] for norm in NORMS}
        for coarse, fine in pairwise(solutions):
            coarse_field = coarse[variable]
            restricted = average_down(fine[variable], coarse_field.grid)
            norms = error_norms(_component(coarse_field, variable), _component(restricted, variable))
            for norm in NORMS:
                per_norm[norm].append(norms[norm])
        for norm in NORMS:
            table.add(variable, norm, per_norm[norm])
    return table


def _fields_of(state: _FluidState, variables: _Sequence[str]) -> _Dict[str, AnyField]:
    fields: _Dict[str, AnyField] = {}
    for variable in variables:
        if variable in ("u", "v"):
            fields[variable] = state.velocity
        elif variable == "c":
            fields[variable] = state.concentration
        elif variable == "rho":
            fields[variable] = state.rho
        else:
            raise ValueError(f"invalid value for variable ({variable!r}), should be {'|'.join(VARIABLES)}")
    return fields


def convergence_study(
    config: "ScenarioConfig", levels: _Sequence[int], variables: _Sequence[str] = ("u", "v", "c")
) -> ConvergenceTable:
    """Runs a scenario at several resolutions and tabulates self-convergence

    Parameters
    ----------
    config : ScenarioConfig
        Scenario at any resolution; each level rescales the cell count and
        the time step together.
    levels : sequence of int
        Cells along x per level, at least three, each twice the previous.
    variables : sequence of str
        Any of ``u``, ``v``, ``c``, ``rho``.

    Returns
    -------
    ConvergenceTable
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError(f"invalid number of levels ({len(levels)}), should be >= 3")
    for coarse, fine in pairwise(levels):
        if fine != 2 * coarse:
            raise _GeometryError(f"levels {coarse} and {fine} are not a factor-2 refinement")
    for variable in variables:
        if variable not in VARIABLES:
            raise ValueError(f"invalid value for variable ({variable!r}), should be {'|'.join(VARIABLES)}")

    solutions = []
    for level in levels:
        _logger.info("convergence level %d", level)
        state = config.at_resolution(level).final_state()
        solutions.append(_fields_of(state, variables))
    table = self_convergence(solutions, levels)
    _logger.info("self-convergence (Linf):\n%s", table.format("Linf"))
    return table


def write_convergence_csv(path: str, table: ConvergenceTable) -> str:
    """Writes ``variable, norm, coarse, fine, error, order`` rows"""
    directory = _os.path.dirname(path)
    if directory:
        _os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = _csv.writer(handle)
        writer.writerow(["variable", "norm", "coarse", "fine", "error", "order"])
        for variable, by_norm in table.errors.items():
            for norm, errors in by_norm.items():
                orders = [_math.nan] + table.orders[variable][norm]
                for (coarse, fine), error, order in zip(pairwise(table.levels), errors, orders):
                    writer.writerow([variable, norm, coarse, fine, repr(error), repr(order)])
    return path


# --- dimensionless numbers ------------------------------------------------------


@define(frozen=True)
class DimensionlessReport:
    """Cell Reynolds and Peclet numbers and the Schmidt number of a state

    ``bds_advised`` is set when the cell Peclet number exceeds 2, where
    centered advection produces spurious oscillations.
    """

    max_speed: float
    reynolds_cell: float
    peclet_cell: float
    schmidt: float
    bds_advised: bool
    courant: _Optional[_Dict[str, float]] = None

    def to_dict(self) -> _Dict[str, object]:
        record: _Dict[str, object] = {
            "max_speed": self.max_speed,
            "reynolds_cell": self.reynolds_cell,
            "peclet_cell": self.peclet_cell,
            "schmidt": self.schmidt,
            "bds_advised": self.bds_advised,
        }
        if self.courant is not None:
            record.update({f"courant_{name}": value for name, value in self.courant.items()})
        return record


def _ratio(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    return numerator / denominator if denominator > 0.0 else _math.inf


def dimensionless_report(state: _FluidState, model: _MixtureModel, dt: _Optional[float] = None) -> DimensionlessReport:
    """Dimensionless numbers of a state, with domain-mean ``nu`` and ``chi``

    ``U`` is the largest face speed and ``dx`` the smaller grid spacing. When
    ``dt`` is given the Courant numbers are included.
    """
    grid = state.grid
    coefficients = _eval_coefficients(state.concentration, model)
    nu = float(np.mean(coefficients.eta_cell.values / state.rho.values))
    chi = float(np.mean(coefficients.chi.values))
    speed = state.velocity.max_abs()
    h = min(grid.dx, grid.dy)
    peclet = _ratio(speed * h, chi)
    return DimensionlessReport(
        max_speed=speed,
        reynolds_cell=_ratio(speed * h, nu),
        peclet_cell=peclet,
        schmidt=_ratio(nu, chi),
        bds_advised=peclet > PECLET_BDS_THRESHOLD,
        courant=None if dt is None else _stability_numbers(state, model, dt),
    )
