# -*- coding: utf-8 -*-
"""Scenario configuration, presets and the simulation driver

A scenario is described in a sectioned ``key = value`` text::

    [scenario]
    preset = cavity-2d

    [grid]
    nx = 128
    ny = 128

Sections are ``scenario grid mixture boundary initial integrator noise
stokes observers output``. Values are numbers, ``true``/``false``, comma
separated lists, or ``name(arg, ...)`` calls for coefficient models, wall
velocities and initial profiles. A preset supplies defaults for every key;
``desk`` presets shrink the grid and the horizon. Lengths, times and masses
are in CGS units.
"""

import concurrent.futures as _futures
import configparser as _configparser
import functools as _functools
import json as _json
import math as _math
import os as _os
import re as _re
from typing import Any as _Any
from typing import Callable as _Callable
from typing import Dict as _Dict
from typing import List as _List
from typing import Optional as _Optional
from typing import Sequence as _Sequence
from typing import Tuple as _Tuple

import numpy as np
from attrs import define, evolve, field, fields

from lowmix import config as _runtime
from lowmix._common import get_logger as _get_logger
from lowmix.advection import BdsOptions as _BdsOptions
from lowmix.analysis import ColumnMeanObserver as _ColumnMeanObserver
from lowmix.analysis import CorrelationSeries as _CorrelationSeries
from lowmix.analysis import SpectrumObserver as _SpectrumObserver
from lowmix.analysis import SpectrumSeries as _SpectrumSeries
from lowmix.analysis import TheoryParams as _TheoryParams
from lowmix.analysis import fit_correlations as _fit_correlations
from lowmix.analysis import merge_correlations as _merge_correlations
from lowmix.analysis import merge_spectra as _merge_spectra
from lowmix.analysis import table_name as _table_name
from lowmix.analysis import write_correlation_csv as _write_correlation_csv
from lowmix.analysis import write_fit_csv as _write_fit_csv
from lowmix.analysis import write_spectrum_csv as _write_spectrum_csv
from lowmix.convergence import dimensionless_report as _dimensionless_report
from lowmix.exceptions import ConfigError as _ConfigError
from lowmix.exceptions import LowMixError as _LowMixError
from lowmix.grid import BCSpec as _BCSpec
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import WallSpec as _WallSpec
from lowmix.integrators import CheckpointObserver as _CheckpointObserver
from lowmix.integrators import Observer as _Observer
from lowmix.integrators import RunResult as _RunResult
from lowmix.integrators import SnapshotObserver as _SnapshotObserver
from lowmix.integrators import StepParams as _StepParams
from lowmix.integrators import run as _run
from lowmix.mixture import WATER_GLYCEROL_CHI as _WATER_GLYCEROL_CHI
from lowmix.mixture import FluidState as _FluidState
from lowmix.mixture import MixtureModel as _MixtureModel
from lowmix.mixture import beta as _beta
from lowmix.mixture import density_of_concentration as _density_of_concentration
from lowmix.mixture import eval_coefficients as _eval_coefficients
from lowmix.mixture import parse_coefficient_model as _parse_coefficient_model
from lowmix.snapshots import write_snapshot as _write_snapshot
from lowmix.stochastic import NoiseStream as _NoiseStream
from lowmix.stokes import SolverOptions as _SolverOptions

__all__ = [
    "PRESETS",
    "ScenarioConfig",
    "ScenarioResult",
    "CavityLid",
    "ConstantLid",
    "parse_config",
    "load_config",
    "serialize_config",
    "initial_state",
    "theory_params",
    "run_scenario",
    "run_ensemble",
]

_logger = _get_logger(__name__)

BOLTZMANN_CGS = 1.380649e-16
_CALL = _re.compile(r"^\s*([a-z][a-z0-9-]*)\s*\((.*)\)\s*$")


# --- value grammar --------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value not in ("true", "false"):
        raise ValueError(f"{text!r} is not true|false")
    return value == "true"


def _format_bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_pair(text: str) -> _Tuple[float, float]:
    parts = [part.strip() for part in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"{text!r} is not a pair of numbers")
    return float(parts[0]), float(parts[1])


def _format_pair(value: _Tuple[float, float]) -> str:
    return f"{value[0]!r}, {value[1]!r}"


def _parse_list(text: str) -> _Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _format_list(value: _Tuple[str, ...]) -> str:
    return ", ".join(value)


def _parse_call(text: str) -> _Tuple[str, _Tuple[float, ...]]:
    """``name(a, b)`` into ``("name", (a, b))``; a bare name has no arguments"""
    match = _CALL.match(text)
    if match is None:
        name = text.strip()
        if not _re.match(r"^[a-z][a-z0-9-]*$", name):
            raise ValueError(f"{text!r} is not name or name(args)")
        return name, ()
    return match.group(1), tuple(float(arg) for arg in match.group(2).split(",") if arg.strip())


def _option(default: _Any, parse: _Callable[[str], _Any] = str, fmt: _Callable[[_Any], str] = str) -> _Any:
    return field(default=default, metadata={"parse": parse, "format": fmt})


def _int(default: int) -> _Any:
    return _option(default, int)


def _float(default: float) -> _Any:
    return _option(default, float, repr)


def _bool(default: bool) -> _Any:
    return _option(default, _parse_bool, _format_bool)


# --- sections -------------------------------------------------------------------


@define(frozen=True)
class ScenarioSection:
    name: str = _option("custom")
    preset: str = _option("none")
    desk: bool = _bool(False)


@define(frozen=True)
class GridSection:
    nx: int = _int(32)
    ny: int = _int(32)
    lx: float = _float(32.0)
    ly: float = _float(32.0)
    dz: float = _float(1.0)
    bc_x: str = _option("periodic")
    bc_y: str = _option("periodic")


@define(frozen=True)
class MixtureSection:
    rho1_bar: float = _float(1.0)
    rho2_bar: float = _float(1.0)
    eta: str = _option("constant(1.0)")
    chi: str = _option("constant(1.0)")
    mu: str = _option("ideal(1.0, 2.0)")
    kT: float = _float(1.0)  # pylint: disable=C0103
    gravity: _Tuple[float, float] = _option((0.0, 0.0), _parse_pair, _format_pair)
    c_range: _Tuple[float, float] = _option((0.0, 1.0), _parse_pair, _format_pair)


@define(frozen=True)
class BoundarySection:
    lid: str = _option("none")
    ghost_rule: str = _option("cubic")
    wall_stencil: str = _option("linear")


@define(frozen=True)
class InitialSection:
    profile: str = _option("uniform(0.5)")
    momentum: str = _option("none")


@define(frozen=True)
class IntegratorSection:
    scheme: str = _option("inertial")
    dt: float = _float(0.1)
    t_end: float = _float(1.0)
    steps: int = _int(0)
    advection: str = _option("centered")
    bds_reconstruction: str = _option("bilinear")
    bds_limited: bool = _bool(False)
    corrector_advective_form: str = _option("trapezoidal")
    corrector_viscosity_source: str = _option("corrected")
    adaptive_cfl: float = _float(0.0)
    eos_projection_stride: int = _int(1)


@define(frozen=True)
class NoiseSection:
    mass: bool = _bool(True)
    momentum: bool = _bool(True)
    seed: int = _int(0)


@define(frozen=True)
class StokesSection:
    tol: float = _float(1e-9)
    gmres_restart: int = _int(30)
    gmres_maxiter: int = _int(100)
    retries: int = _int(2)


@define(frozen=True)
class ObserversSection:
    snapshot_every: int = _int(0)
    snapshot_fields: _Tuple[str, ...] = _option(("concentration",), _parse_list, _format_list)
    checkpoint_every: int = _int(0)
    spectrum_every: int = _int(0)
    spectrum_field: str = _option("rho")
    spectrum_start: int = _int(0)
    column_every: int = _int(0)
    correlation_lags: int = _int(0)
    oscillatory_modes: int = _int(4)


@define(frozen=True)
class OutputSection:
    directory: str = _option("lowmix-output")
    summary: str = _option("summary.json")


_SECTIONS: _Dict[str, type] = {
    "scenario": ScenarioSection,
    "grid": GridSection,
    "mixture": MixtureSection,
    "boundary": BoundarySection,
    "initial": InitialSection,
    "integrator": IntegratorSection,
    "noise": NoiseSection,
    "stokes": StokesSection,
    "observers": ObserversSection,
    "output": OutputSection,
}


# --- presets --------------------------------------------------------------------

_WG_CHI_MEAN = float(_WATER_GLYCEROL_CHI(0.195))
_KT_300K = BOLTZMANN_CGS * 300.0

PRESETS: _Dict[str, _Dict[str, _Dict[str, str]]] = {
    "equilibrium": {
        "grid": {"nx": "32", "ny": "32", "lx": "32.0", "ly": "32.0", "dz": "1000000.0"},
        "mixture": {
            "rho1_bar": repr(2.0 / 3.0),
            "rho2_bar": "2.0",
            "eta": "linear(1.0, 10.0)",
            "chi": "constant(1.0)",
            "mu": "ideal(1.0, 2.0)",
            "kT": "1.0",
        },
        "initial": {"profile": "uniform(0.5)"},
        "integrator": {"dt": "0.1", "steps": "1100000"},
        "observers": {"spectrum_every": "1", "spectrum_field": "rho", "spectrum_start": "100000"},
    },
    "cavity-2d": {
        "grid": {"nx": "64", "ny": "64", "lx": "1.0", "ly": "1.0", "bc_x": "wall", "bc_y": "wall"},
        "mixture": {
            "rho1_bar": "2.0",
            "rho2_bar": "1.0",
            "eta": "linear(0.1, 1.0)",
            "chi": "linear(0.0001, 0.001)",
            "gravity": "0.0, -1.0",
        },
        "boundary": {"lid": "cavity"},
        "initial": {"profile": "gaussian-bump(1.0, 75.0)"},
        "integrator": {"dt": "0.005", "t_end": "2.0"},
        "noise": {"mass": "false", "momentum": "false"},
    },
    "square-bubble": {
        "grid": {"nx": "256", "ny": "256", "lx": "1.0", "ly": "1.0", "bc_x": "wall", "bc_y": "wall"},
        "mixture": {
            "rho1_bar": "2.0",
            "rho2_bar": "1.0",
            "eta": "linear(0.1, 1.0)",
            "chi": "constant(0.0)",
            "gravity": "0.0, -5.0",
        },
        "boundary": {"lid": "cavity"},
        "initial": {"profile": "square(1.0, 0.0, 0.25)"},
        "integrator": {
            "dt": "0.0025",
            "t_end": "4.0",
            "advection": "bds",
            "bds_reconstruction": "quadratic",
            "bds_limited": "true",
        },
        "noise": {"mass": "false", "momentum": "false"},
    },
    "water-glycerol": {
        "grid": {"nx": "256", "ny": "256", "lx": "1.132", "ly": "1.132", "dz": "1.0", "bc_y": "wall"},
        "mixture": {
            "rho1_bar": "1.29",
            "rho2_bar": "1.0",
            "eta": "water-glycerol",
            "chi": "water-glycerol",
            "kT": repr(_KT_300K),
            "gravity": "0.0, -981.0",
            "c_range": "0.0, 0.6",
        },
        "initial": {"profile": "two-layer(0.39, 0.0)"},
        "integrator": {"dt": "0.01375", "t_end": "21021.0"},
        "noise": {"mass": "false", "momentum": "true"},
        "observers": {"spectrum_every": "10", "spectrum_field": "column", "column_every": "10"},
    },
    "kh-demo": {
        "grid": {"nx": "256", "ny": "128", "lx": "1.0", "ly": "0.5", "bc_y": "wall"},
        "mixture": {
            "rho1_bar": "10.0",
            "rho2_bar": "1.0",
            "eta": "linear(0.0001, 0.001)",
            "chi": "constant(1e-06)",
            "gravity": "0.0, -0.1",
        },
        "boundary": {"lid": "constant(1.0)"},
        "initial": {"profile": "shear-layer(1.0, 0.0)", "momentum": "upper(1.0)"},
        "integrator": {
            "dt": "0.01",
            "t_end": "6.0",
            "advection": "bds",
            "bds_limited": "true",
            "adaptive_cfl": "0.9",
        },
        "noise": {"mass": "false", "momentum": "false"},
    },
}
PRESETS["water-glycerol-constchi"] = {
    **PRESETS["water-glycerol"],
    "mixture": {**PRESETS["water-glycerol"]["mixture"], "chi": f"constant({_WG_CHI_MEAN!r})"},
}
PRESETS["water-glycerol-microgravity"] = {
    **PRESETS["water-glycerol"],
    "mixture": {**PRESETS["water-glycerol"]["mixture"], "gravity": "0.0, 0.0"},
    "integrator": {"scheme": "overdamped", "dt": "0.22", "t_end": "21021.0"},
}

_DESK: _Dict[str, _Dict[str, _Dict[str, str]]] = {
    "equilibrium": {"integrator": {"steps": "220000"}, "observers": {"spectrum_start": "20000"}},
    "square-bubble": {"grid": {"nx": "128", "ny": "128"}, "integrator": {"dt": "0.005"}},
    "water-glycerol": {"grid": {"nx": "64", "ny": "64"}, "integrator": {"t_end": "2000.0"}},
    "water-glycerol-constchi": {"grid": {"nx": "64", "ny": "64"}, "integrator": {"t_end": "2000.0"}},
    "water-glycerol-microgravity": {"grid": {"nx": "64", "ny": "64"}, "integrator": {"t_end": "2000.0"}},
    "kh-demo": {"grid": {"nx": "64", "ny": "32"}, "integrator": {"t_end": "2.0"}},
}


# --- wall velocities ------------------------------------------------------------


@define(frozen=True)
class CavityLid:
    """Lid velocity tapering to zero at the corners and ramping up until ``t = 1/2``"""

    sign: float = 1.0
    length: float = 1.0

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        shape = 1.0 + np.sin(2.0 * np.pi * x / self.length - 0.5 * np.pi)
        if t < 0.5:
            return self.sign * 0.25 * shape * (1.0 + _math.sin(2.0 * _math.pi * t - 0.5 * _math.pi))
        return self.sign * 0.5 * shape


@define(frozen=True)
class ConstantLid:
    speed: float = 1.0

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.full_like(x, self.speed, dtype=float)


# --- the configuration record ---------------------------------------------------


@define(frozen=True)
class ScenarioConfig:
    """A fully resolved scenario

    Every section is a frozen record; use :func:`parse_config` to build one
    from text and :func:`serialize_config` to write it back.
    """

    scenario: ScenarioSection = field(factory=ScenarioSection)
    grid: GridSection = field(factory=GridSection)
    mixture: MixtureSection = field(factory=MixtureSection)
    boundary: BoundarySection = field(factory=BoundarySection)
    initial: InitialSection = field(factory=InitialSection)
    integrator: IntegratorSection = field(factory=IntegratorSection)
    noise: NoiseSection = field(factory=NoiseSection)
    stokes: StokesSection = field(factory=StokesSection)
    observers: ObserversSection = field(factory=ObserversSection)
    output: OutputSection = field(factory=OutputSection)

    def build_grid(self) -> _Grid:
        g = self.grid
        return _Grid(g.nx, g.ny, g.lx / g.nx, g.ly / g.ny, g.dz, g.bc_x, g.bc_y)

    def build_model(self) -> _MixtureModel:
        m = self.mixture
        return _MixtureModel(
            m.rho1_bar,
            m.rho2_bar,
            _parse_coefficient_model(m.eta, "eta"),
            _parse_coefficient_model(m.chi, "chi"),
            _parse_coefficient_model(m.mu, "mu"),
            m.kT,
            m.gravity,
            m.c_range,
        )

    def build_bc(self) -> _BCSpec:
        name, args = _parse_call(self.boundary.lid)
        if name == "none":
            top = bottom = _WallSpec()
        elif name == "cavity":
            top = _WallSpec(CavityLid(1.0, self.grid.lx))
            bottom = _WallSpec(CavityLid(-1.0, self.grid.lx))
        elif name == "constant" and len(args) == 1:
            top, bottom = _WallSpec(ConstantLid(args[0])), _WallSpec()
        else:
            raise _ConfigError(f"invalid value for lid ({self.boundary.lid!r}), should be none|cavity|constant(u)")
        return _BCSpec(
            y_lo=bottom,
            y_hi=top,
            ghost_rule=self.boundary.ghost_rule,
            wall_stencil=self.boundary.wall_stencil,
        )

    def build_params(self) -> _StepParams:
        i = self.integrator
        return _StepParams(
            dt=i.dt,
            scheme=i.scheme,
            advection=i.advection,
            bds=_BdsOptions(reconstruction=i.bds_reconstruction, limited=i.bds_limited),
            corrector_advective_form=i.corrector_advective_form,
            corrector_viscosity_source=i.corrector_viscosity_source,
            mass_noise=self.noise.mass,
            momentum_noise=self.noise.momentum,
            bc=self.build_bc(),
            solver=_SolverOptions(
                tol=self.stokes.tol,
                gmres_restart=self.stokes.gmres_restart,
                gmres_maxiter=self.stokes.gmres_maxiter,
                retries=self.stokes.retries,
            ),
        )

    @property
    def n_steps(self) -> int:
        if self.integrator.steps > 0:
            return self.integrator.steps
        return int(round(self.integrator.t_end / self.integrator.dt))

    def at_resolution(self, nx: int) -> "ScenarioConfig":
        """The same scenario with ``nx`` cells along x and the time step scaled with the spacing"""
        factor = nx / self.grid.nx
        ny = int(round(self.grid.ny * factor))
        integrator = evolve(self.integrator, dt=self.integrator.dt / factor, steps=int(round(self.integrator.steps * factor)))
        return evolve(self, grid=evolve(self.grid, nx=nx, ny=ny), integrator=integrator)

    def final_state(self) -> _FluidState:
        """Runs the scenario without observers and returns the final state"""
        model = self.build_model()
        result = _run(
            initial_state(self, self.build_grid(), model),
            model,
            self.build_params(),
            self.n_steps,
            rng=_NoiseStream(self.noise.seed),
            eos_projection_stride=self.integrator.eos_projection_stride,
            adaptive_cfl=self.integrator.adaptive_cfl or None,
        )
        return result.state


# --- parsing --------------------------------------------------------------------


def _layers(user: _configparser.ConfigParser, desk: bool) -> _List[_Dict[str, _Dict[str, str]]]:
    preset = user.get("scenario", "preset", fallback="none").strip()
    layers: _List[_Dict[str, _Dict[str, str]]] = []
    if preset in PRESETS:
        layers.append(PRESETS[preset])
        if desk or _parse_bool(user.get("scenario", "desk", fallback="false")):
            layers.append(_DESK.get(preset, {}))
        if preset == "equilibrium":
            scheme = user.get("integrator", "scheme", fallback="inertial").strip()
            if scheme == "overdamped" and not user.has_option("mixture", "eta"):
                layers.append({"mixture": {"eta": "linear(1.0, 100.0)"}})
    return layers


def _validate(config: ScenarioConfig, errors: _List[str]) -> None:
    checks: _List[_Tuple[str, _Callable[[], object]]] = [
        ("grid", config.build_grid),
        ("mixture", config.build_model),
        ("boundary", config.build_bc),
        ("integrator", config.build_params),
        ("initial profile", lambda: _profile_builder(config.initial.profile)),
        ("initial momentum", lambda: _momentum_builder(config.initial.momentum)),
    ]
    for what, check in checks:
        try:
            check()
        except (_LowMixError, ValueError, TypeError) as err:
            errors.append(f"{what}: {err}")
    if config.integrator.adaptive_cfl and (config.noise.mass or config.noise.momentum):
        errors.append("integrator: adaptive_cfl requires [noise] mass = false and momentum = false")
    if not 0.0 <= config.integrator.adaptive_cfl <= 1.0:
        errors.append(f"integrator: invalid value for adaptive_cfl ({config.integrator.adaptive_cfl!r}), should be in [0, 1]")
    if config.integrator.eos_projection_stride < 0:
        stride = config.integrator.eos_projection_stride
        errors.append(f"integrator: invalid value for eos_projection_stride ({stride!r}), should be >= 0")
    if config.observers.spectrum_field not in ("rho", "rho1", "concentration", "column"):
        errors.append(f"observers: invalid value for spectrum_field ({config.observers.spectrum_field!r})")
    if config.observers.correlation_lags and not config.observers.column_every:
        errors.append("observers: correlation_lags needs column_every > 0")


def parse_config(text: str, desk: bool = False) -> ScenarioConfig:
    """Parses a scenario text, layering it over its preset

    Parameters
    ----------
    text : str
        Sectioned ``key = value`` text.
    desk : bool, optional
        Apply the reduced desk-scale preset values.

    Returns
    -------
    ScenarioConfig

    Raises
    ------
    ConfigError
        Listing every invalid section, key or value found.
    """
    user = _configparser.ConfigParser(interpolation=None)
    try:
        user.read_string(text)
    except _configparser.Error as err:
        raise _ConfigError(f"malformed scenario text: {err}") from err

    errors: _List[str] = []
    preset = user.get("scenario", "preset", fallback="none").strip()
    if preset != "none" and preset not in PRESETS:
        errors.append(f"scenario: unknown preset {preset!r}, should be none|{'|'.join(PRESETS)}")

    merged: _Dict[str, _Dict[str, str]] = {name: {} for name in _SECTIONS}
    for layer in _layers(user, desk):
        for section, values in layer.items():
            merged[section].update(values)
    for section in user.sections():
        if section not in _SECTIONS:
            errors.append(f"unknown section [{section}]")
            continue
        merged[section].update(user[section])
    if desk and preset in PRESETS:
        merged["scenario"]["desk"] = "true"

    records = {}
    for section, cls in _SECTIONS.items():
        known = {f.name.lower(): f for f in fields(cls)}
        kwargs = {}
        for key, raw in merged[section].items():
            attribute = known.get(key.lower())
            if attribute is None:
                errors.append(f"{section}: unknown key {key!r}")
                continue
            try:
                kwargs[attribute.name] = attribute.metadata["parse"](raw)
            except (ValueError, TypeError) as err:
                errors.append(f"{section}: invalid value for {key} ({raw!r}): {err}")
        records[section] = cls(**kwargs)
    config = ScenarioConfig(**records)
    if not errors:
        _validate(config, errors)
    if errors:
        raise _ConfigError("invalid scenario configuration:\n  " + "\n  ".join(errors))
    return config


def load_config(path: str, desk: bool = False) -> ScenarioConfig:
    with open(path, encoding="utf-8") as handle:
        return parse_config(handle.read(), desk)


def serialize_config(config: ScenarioConfig) -> str:
    """Writes every key of every section in a fixed order"""
    lines = []
    for section in _SECTIONS:
        record = getattr(config, section)
        lines.append(f"[{section}]")
        for attribute in fields(type(record)):
            lines.append(f"{attribute.name} = {attribute.metadata['format'](getattr(record, attribute.name))}")
        lines.append("")
    return "\n".join(lines)


# --- initial data ---------------------------------------------------------------


Profile = _Callable[[_Grid, int], np.ndarray]


def _profile_builder(text: str) -> Profile:  # pylint: disable=R0911
    name, args = _parse_call(text)
    if name == "uniform" and len(args) == 1:
        return lambda grid, seed: np.full(grid.shape, args[0])
    if name == "gaussian-bump" and len(args) == 2:

        def bump(grid: _Grid, seed: int) -> np.ndarray:
            x, y = grid.cell_centers()
            lx, ly = grid.lengths
            return args[0] * np.exp(-args[1] * ((x - 0.5 * lx) ** 2 + (y - 0.5 * ly) ** 2))

        return bump
    if name == "square" and len(args) == 3:

        def square(grid: _Grid, seed: int) -> np.ndarray:
            x, y = grid.cell_centers()
            lx, ly = grid.lengths
            half = 0.5 * _math.sqrt(args[2])
            inside = (np.abs(x - 0.5 * lx) < half * lx) & (np.abs(y - 0.5 * ly) < half * ly)
            return np.where(inside, args[0], args[1])

        return square
    if name in ("two-layer", "shear-layer") and len(args) == 2:

        def layers(grid: _Grid, seed: int) -> np.ndarray:
            c = np.where(np.arange(grid.ny)[None, :] < grid.ny // 2, args[0], args[1]) * np.ones(grid.shape)
            if name == "shear-layer":
                c[:, grid.ny // 2] = np.random.default_rng(seed).uniform(0.0, 1.0, grid.nx)
            return c

        return layers
    raise ValueError(
        f"invalid profile {text!r}, should be uniform(c)|gaussian-bump(amplitude, width)|"
        "square(c_in, c_out, area_fraction)|two-layer(c_bottom, c_top)|shear-layer(c_bottom, c_top)"
    )


def _momentum_builder(text: str) -> _Callable[[_Grid], _FaceField]:
    name, args = _parse_call(text)
    if name == "none":
        return _FaceField.zeros
    if name == "upper" and len(args) == 1:

        def upper(grid: _Grid) -> _FaceField:
            m = _FaceField.zeros(grid)
            m.x[:, grid.ny // 2 :] = args[0]
            return m

        return upper
    raise ValueError(f"invalid momentum {text!r}, should be none|upper(m_x)")


def initial_state(config: ScenarioConfig, grid: _Grid, model: _MixtureModel) -> _FluidState:
    """Initial densities on the EOS from the concentration profile, with the configured momentum"""
    c = _profile_builder(config.initial.profile)(grid, config.noise.seed)
    rho = _density_of_concentration(c, model)
    return _FluidState(
        _CellField(grid, c * rho),
        _CellField(grid, rho),
        _momentum_builder(config.initial.momentum)(grid),
        _CellField.zeros(grid),
    )


def theory_params(state: _FluidState, model: _MixtureModel) -> _TheoryParams:
    """Constant-coefficient parameters of the giant-fluctuation predictions at the domain mean

    The gradient is the mean vertical derivative of the column-averaged
    concentration; ``g`` is the downward gravity magnitude so that heavier
    fluid below gives a positive buoyancy product.
    """
    c = state.concentration
    coefficients = _eval_coefficients(c, model)
    profile = c.values.mean(axis=0)
    dy = state.grid.dy
    h = float((profile[-1] - profile[0]) / ((profile.size - 1) * dy)) if profile.size > 1 else 0.0
    c_mean = float(c.values.mean())
    return _TheoryParams(
        eta=float(coefficients.eta_cell.values.mean()),
        chi=float(coefficients.chi.values.mean()),
        rho=float(state.rho.values.mean()),
        beta=float(_beta(c_mean, model)),
        g=-model.gravity[1],
        h=-h,
        kT=model.kT,
    )


# --- driver ---------------------------------------------------------------------


@define(eq=False)
class ScenarioResult:
    """Outcome of :func:`run_scenario`"""

    config: ScenarioConfig
    run: _RunResult
    summary: _Dict[str, _Any]
    files: _List[str] = field(factory=list)
    spectrum: _Optional[_SpectrumSeries] = None
    correlation: _Optional[_CorrelationSeries] = None


def _observers(config: ScenarioConfig, directory: str) -> _Dict[str, _Observer]:
    o = config.observers
    observers: _Dict[str, _Observer] = {}
    if o.snapshot_every:
        observers["snapshots"] = _SnapshotObserver(o.snapshot_every, f"{directory}/snapshots", o.snapshot_fields)
    if o.checkpoint_every:
        observers["checkpoints"] = _CheckpointObserver(o.checkpoint_every, f"{directory}/checkpoints", config.noise.seed)
    if o.spectrum_every:
        observers["spectrum"] = _SpectrumObserver(o.spectrum_every, o.spectrum_field, o.spectrum_start)
    if o.column_every:
        observers["columns"] = _ColumnMeanObserver(o.column_every, o.spectrum_start)
    return observers


def run_scenario(config: ScenarioConfig, output_dir: _Optional[str] = None) -> ScenarioResult:
    """Runs a scenario to its end and writes its output files

    Files written under the output directory: snapshots and checkpoints at
    their cadence, the final concentration and velocity, spectrum and
    correlation tables when those observers are enabled, and a JSON summary
    of the invariant metrics.

    Raises
    ------
    ConfigError, SolverError, NonFiniteError
        A failing run saves ``abort_checkpoint.npz`` before re-raising.
    """
    directory = output_dir or _runtime.output_dir or config.output.directory
    _os.makedirs(directory, exist_ok=True)
    with open(f"{directory}/scenario.ini", "w", encoding="utf-8") as handle:
        handle.write(serialize_config(config))

    grid = config.build_grid()
    model = config.build_model()
    params = config.build_params()
    observers = _observers(config, directory)
    _logger.info(
        "running %s (%s) on %dx%d for %d steps of %g",
        config.scenario.name,
        config.scenario.preset,
        grid.nx,
        grid.ny,
        config.n_steps,
        params.dt,
    )
    result = _run(
        initial_state(config, grid, model),
        model,
        params,
        config.n_steps,
        observers=list(observers.values()),
        rng=_NoiseStream(config.noise.seed),
        eos_projection_stride=config.integrator.eos_projection_stride,
        checkpoint_path=f"{directory}/abort_checkpoint.npz",
        adaptive_cfl=config.integrator.adaptive_cfl or None,
    )
    state = result.state
    files = [
        _write_snapshot(f"{directory}/final_concentration.lmx", state.concentration, state.t, "concentration", state.step),
        _write_snapshot(f"{directory}/final_velocity.lmx", state.velocity, state.t, "velocity", state.step),
    ]
    for name in ("snapshots", "checkpoints"):
        if name in observers:
            files.extend(getattr(observers[name], "written"))

    spectrum = getattr(observers.get("spectrum"), "series", None)
    if spectrum is not None and spectrum.count:
        files.append(_write_spectrum_csv(f"{directory}/{_table_name('spectrum', spectrum.t_end, spectrum.window)}", spectrum))

    correlation = None
    columns = observers.get("columns")
    if config.observers.correlation_lags and isinstance(columns, _ColumnMeanObserver) and len(columns.times) > 1:
        lags = min(config.observers.correlation_lags, len(columns.times) - 1)
        correlation = columns.correlation(lags)
        window = columns.times[-1] - columns.times[0]
        name = _table_name("correlation", columns.times[-1], window)
        files.append(_write_correlation_csv(f"{directory}/{name}", correlation))
        if lags + 1 >= 10:
            fits = _fit_correlations(correlation, config.observers.oscillatory_modes)
            files.append(_write_fit_csv(f"{directory}/{_table_name('fits', columns.times[-1], window)}", correlation, fits))

    summary: _Dict[str, _Any] = {
        "scenario": config.scenario.name,
        "preset": config.scenario.preset,
        "seed": config.noise.seed,
        **result.summary(),
        "dimensionless": _dimensionless_report(state, model, params.dt).to_dict(),
    }
    if spectrum is not None and spectrum.count:
        summary["spectrum_average"] = spectrum.average()
        summary["spectrum_samples"] = spectrum.count
    summary_path = f"{directory}/{config.output.summary}"
    with open(summary_path, "w", encoding="utf-8") as handle:
        _json.dump(summary, handle, indent=2, default=float)
    files.append(summary_path)
    _logger.info("scenario %s finished at t=%g, summary in %s", config.scenario.name, state.t, summary_path)
    return ScenarioResult(config, result, summary, files, spectrum, correlation)


def _ensemble_member(
    config: ScenarioConfig, seed: int, directory: str
) -> _Tuple[_Optional[_SpectrumSeries], _Optional[_CorrelationSeries]]:
    member = evolve(config, noise=evolve(config.noise, seed=seed))
    outcome = run_scenario(member, f"{directory}/seed_{seed}")
    return outcome.spectrum, outcome.correlation


def run_ensemble(
    config: ScenarioConfig, seeds: _Sequence[int], workers: int = 1, output_dir: _Optional[str] = None
) -> _Tuple[_Optional[_SpectrumSeries], _Optional[_CorrelationSeries]]:
    """Runs one member per seed in a process pool and merges their spectra and correlations"""
    if not seeds:
        raise _ConfigError("an ensemble needs at least one seed")
    directory = output_dir or config.output.directory
    with _futures.ProcessPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(_ensemble_member, [config] * len(seeds), seeds, [directory] * len(seeds)))

    spectra = [s for s, _ in outcomes if s is not None and s.count]
    correlations = [c for _, c in outcomes if c is not None]
    spectrum = _functools.reduce(_merge_spectra, spectra) if spectra else None
    correlation = _functools.reduce(_merge_correlations, correlations) if correlations else None
    if spectrum is not None:
        _write_spectrum_csv(f"{directory}/{_table_name('ensemble_spectrum', spectrum.t_end, spectrum.window)}", spectrum)
    if correlation is not None:
        _write_correlation_csv(f"{directory}/ensemble_correlation.csv", correlation)
    _logger.info("ensemble of %d members merged", len(seeds))
    return spectrum, correlation
