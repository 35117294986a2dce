# -*- coding: utf-8 -*-
"""Equation of state and transport coefficients of a binary liquid mixture

The two components mix without change of volume, so the densities obey
``rho1 / rho1_bar + rho2 / rho2_bar = 1``. This fixes the density as a
function of the mass fraction ``c = rho1 / rho`` and makes ``beta / rho``
a material constant.
"""

import re as _re
from typing import Callable as _Callable
from typing import Dict as _Dict
from typing import Tuple as _Tuple
from typing import Union as _Union

import numpy as np
from attrs import define, field

from lowmix import config as _runtime
from lowmix._decorators import finite_output as _finite_output
from lowmix.exceptions import ConfigError as _ConfigError
from lowmix.exceptions import DomainError as _DomainError
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import NodeField as _NodeField
from lowmix.grid import average_cell_to_face as _average_cell_to_face
from lowmix.grid import average_cell_to_node as _average_cell_to_node

__all__ = [
    "ConstantModel",
    "LinearModel",
    "RationalModel",
    "IdealMixtureModel",
    "parse_coefficient_model",
    "MixtureModel",
    "FluidState",
    "Coefficients",
    "density_of_concentration",
    "beta",
    "clamp_concentration",
    "eval_coefficients",
    "project_pair_to_eos",
    "project_state_to_eos",
    "eos_residual",
    "max_eos_residual",
    "face_coefficient",
    "describe_coefficient_model",
]

ArrayLike = _Union[float, np.ndarray]


@define(frozen=True)
class ConstantModel:
    value: float = field(converter=float)

    def __call__(self, c: ArrayLike) -> np.ndarray:
        return np.full_like(np.asarray(c, dtype=float), self.value)


@define(frozen=True)
class LinearModel:
    """Linear interpolation between the values at c = 0 and c = 1"""

    c0_val: float = field(converter=float)
    c1_val: float = field(converter=float)

    def __call__(self, c: ArrayLike) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return self.c0_val + (self.c1_val - self.c0_val) * c


@define(frozen=True)
class RationalModel:
    """``scale * (a + b c) / (d + e c)``"""

    a: float = field(converter=float)
    b: float = field(converter=float)
    d: float = field(converter=float)
    e: float = field(converter=float)
    scale: float = field(default=1.0, converter=float)

    def __call__(self, c: ArrayLike) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        denominator = self.d + self.e * c
        if np.any(denominator <= 0.0):
            raise _DomainError("rational coefficient fit has a nonpositive denominator")
        return self.scale * (self.a + self.b * c) / denominator


@define(frozen=True)
class IdealMixtureModel:
    """Ideal-mixture ``mu_c^-1 k_B T = c (1 - c) [c m2 + (1 - c) m1]``"""

    m1: float = field(default=1.0, converter=float)
    m2: float = field(default=2.0, converter=float)

    def __call__(self, c: ArrayLike) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return c * (1.0 - c) * (c * self.m2 + (1.0 - c) * self.m1)


CoefficientModel = _Union[ConstantModel, LinearModel, RationalModel, IdealMixtureModel]

WATER_GLYCEROL_ETA = RationalModel(1.009, 1.1262, 1.0, -1.5326, scale=1e-2)
WATER_GLYCEROL_CHI = RationalModel(1.024, -1.002, 1.0, 0.663, scale=1e-5)

_NAMED: _Dict[_Tuple[str, str], CoefficientModel] = {
    ("water-glycerol", "eta"): WATER_GLYCEROL_ETA,
    ("water-glycerol", "chi"): WATER_GLYCEROL_CHI,
    ("ideal-gas-like", "mu"): IdealMixtureModel(),
}
_PARAMETRISED: _Dict[str, _Callable[..., CoefficientModel]] = {
    "constant": ConstantModel,
    "linear": LinearModel,
    "rational": RationalModel,
    "ideal": IdealMixtureModel,
}
_CALL = _re.compile(r"^\s*([a-z][a-z0-9-]*)\s*\((.*)\)\s*$")


def parse_coefficient_model(text: str, kind: str) -> CoefficientModel:
    """Builds a coefficient model from its configuration string

    Parameters
    ----------
    text : str
        ``constant(val)``, ``linear(c0_val, c1_val)``, ``rational(a, b, d, e[, scale])``,
        ``ideal(m1, m2)`` or a named preset (``water-glycerol`` for ``eta`` and
        ``chi``, ``ideal-gas-like`` for ``mu``).
    kind : str
        ``eta``, ``chi`` or ``mu``.

    Returns
    -------
    CoefficientModel
    """
    key = (text.strip(), kind)
    if key in _NAMED:
        return _NAMED[key]

    match = _CALL.match(text)
    if match is None or match.group(1) not in _PARAMETRISED:
        raise _ConfigError(f"invalid value for {kind} model ({text!r})")
    try:
        args = [float(arg) for arg in match.group(2).split(",") if arg.strip()]
        return _PARAMETRISED[match.group(1)](*args)
    except (TypeError, ValueError) as err:
        raise _ConfigError(f"invalid arguments for {kind} model ({text!r})") from err


def describe_coefficient_model(model: CoefficientModel) -> str:
    """Inverse of :func:`parse_coefficient_model`"""
    for (name, _), named in _NAMED.items():
        if named == model:
            return name
    if isinstance(model, ConstantModel):
        return f"constant({model.value!r})"
    if isinstance(model, LinearModel):
        return f"linear({model.c0_val!r}, {model.c1_val!r})"
    if isinstance(model, RationalModel):
        return f"rational({model.a!r}, {model.b!r}, {model.d!r}, {model.e!r}, {model.scale!r})"
    return f"ideal({model.m1!r}, {model.m2!r})"


def _positive(instance: object, attribute: object, value: float) -> None:
    if not value > 0.0:
        raise _DomainError(f"invalid value for {getattr(attribute, 'name', '?')} ({value!r}), should be > 0")


@define(frozen=True)
class MixtureModel:
    """Material description of a binary mixture

    Parameters
    ----------
    rho1_bar, rho2_bar : float
        Densities of the pure components.
    eta, chi, mu : CoefficientModel
        Shear viscosity, mass diffusion coefficient and ``mu_c^-1 k_B T`` as
        functions of the mass fraction.
    kT : float
        Thermal energy scaling the momentum noise.
    gravity : tuple[float, float]
        Gravitational acceleration vector.
    c_range : tuple[float, float], optional
        Interval of mass fractions on which the coefficient models are
        checked for positivity; fits with a pole inside [0, 1] narrow it.
    """

    rho1_bar: float = field(converter=float, validator=_positive)
    rho2_bar: float = field(converter=float, validator=_positive)
    eta: CoefficientModel = ConstantModel(1.0)
    chi: CoefficientModel = ConstantModel(1.0)
    mu: CoefficientModel = IdealMixtureModel()
    kT: float = field(default=1.0, converter=float)  # pylint: disable=C0103
    gravity: _Tuple[float, float] = field(default=(0.0, 0.0), converter=lambda g: (float(g[0]), float(g[1])))
    c_range: _Tuple[float, float] = field(default=(0.0, 1.0), converter=lambda r: (float(r[0]), float(r[1])))

    def __attrs_post_init__(self) -> None:
        probe = np.linspace(self.c_range[0], self.c_range[1], 101)
        if not np.all(self.eta(probe) > 0.0):
            raise _DomainError("viscosity model must be positive on c_range")
        if not np.all(self.chi(probe) >= 0.0):
            raise _DomainError("diffusion model must be nonnegative on c_range")
        if not np.all(self.mu(probe) >= -1e-15):
            raise _DomainError("mu_c^-1 kT model must be nonnegative on c_range")

    @property
    def beta_over_rho(self) -> float:
        """The material constant ``1/rho2_bar - 1/rho1_bar``"""
        return 1.0 / self.rho2_bar - 1.0 / self.rho1_bar


def _check_unit_interval(c: np.ndarray) -> np.ndarray:
    eps = _runtime.clamp_eps
    if np.any(c < -eps) or np.any(c > 1.0 + eps):
        raise _DomainError(f"concentration outside [0, 1] beyond clamp window {eps!r}")
    return np.clip(c, 0.0, 1.0)


def clamp_concentration(c: ArrayLike) -> np.ndarray:
    """Clips c into [0, 1], refusing values beyond the configured clamp window"""
    return _check_unit_interval(np.asarray(c, dtype=float))


def density_of_concentration(c: ArrayLike, model: MixtureModel) -> np.ndarray:
    """Density of a mixture of mass fraction c that lies on the EOS

    Parameters
    ----------
    c : float or numpy.ndarray
        Mass fraction of the first component.
    model : MixtureModel

    Returns
    -------
    numpy.ndarray
        ``1 / (c / rho1_bar + (1 - c) / rho2_bar)``
    """
    c = clamp_concentration(c)
    return 1.0 / (c / model.rho1_bar + (1.0 - c) / model.rho2_bar)


def beta(c: ArrayLike, model: MixtureModel) -> np.ndarray:
    """Solutal expansion coefficient ``(1/rho) d rho / d c``"""
    c = clamp_concentration(c)
    return (model.rho1_bar - model.rho2_bar) / (c * model.rho2_bar + (1.0 - c) * model.rho1_bar)


@define(eq=False)
class FluidState:
    """Conserved variables of the mixture plus the mechanical pressure

    ``m`` is the momentum density on the faces. ``step`` counts completed
    time steps and keys the random streams.
    """

    rho1: _CellField
    rho: _CellField
    m: _FaceField
    pi: _CellField
    t: float = 0.0
    step: int = 0

    @property
    def grid(self) -> _Grid:
        return self.rho.grid

    @property
    def rho2(self) -> _CellField:
        return _CellField(self.grid, self.rho.values - self.rho1.values)

    @property
    def concentration(self) -> _CellField:
        return _CellField(self.grid, self.rho1.values / self.rho.values)

    def rho_face(self) -> _FaceField:
        return _average_cell_to_face(self.rho)

    @property
    def velocity(self) -> _FaceField:
        return self.m / self.rho_face()

    def copy(self) -> "FluidState":
        return FluidState(self.rho1.copy(), self.rho.copy(), self.m.copy(), self.pi.copy(), self.t, self.step)


@define(eq=False)
class Coefficients:
    eta_cell: _CellField
    eta_node: _NodeField
    chi: _CellField
    mu_inv_kT: _CellField  # pylint: disable=C0103

    @property
    def eta(self) -> _Tuple[_CellField, _NodeField]:
        return (self.eta_cell, self.eta_node)


@_finite_output("coefficients")
def eval_coefficients(c: _CellField, model: MixtureModel) -> Coefficients:
    """Evaluates the transport coefficients on a concentration field

    Parameters
    ----------
    c : CellField
        Mass fraction, clamped into [0, 1] within the configured window.
    model : MixtureModel

    Returns
    -------
    Coefficients
        Cell and node viscosity, diffusion coefficient and ``mu_c^-1 k_B T``.
    """
    grid = c.grid
    values = clamp_concentration(c.values)
    eta_cell = _CellField(grid, model.eta(values))
    return Coefficients(
        eta_cell=eta_cell,
        eta_node=_average_cell_to_node(eta_cell),
        chi=_CellField(grid, model.chi(values)),
        mu_inv_kT=_CellField(grid, np.maximum(model.mu(values), 0.0)),
    )


def face_coefficient(c: _CellField, model: MixtureModel) -> _FaceField:
    """``chi rho mu_c^-1 k_B T`` evaluated at the face-averaged concentration"""
    c_face = _average_cell_to_face(c)
    rho_x = density_of_concentration(c_face.x, model)
    rho_y = density_of_concentration(c_face.y, model)
    cx = clamp_concentration(c_face.x)
    cy = clamp_concentration(c_face.y)
    return _FaceField(
        c.grid,
        model.chi(cx) * rho_x * model.mu(cx),
        model.chi(cy) * rho_y * model.mu(cy),
    )


def eos_residual(rho1: ArrayLike, rho2: ArrayLike, rho1_bar: float, rho2_bar: float) -> np.ndarray:
    return np.asarray(rho1) / rho1_bar + np.asarray(rho2) / rho2_bar - 1.0


def project_pair_to_eos(
    rho1: ArrayLike, rho2: ArrayLike, rho1_bar: float, rho2_bar: float
) -> _Tuple[np.ndarray, np.ndarray]:
    """Orthogonal (L2) projection of (rho1, rho2) onto the EOS line

    Returns
    -------
    tuple[numpy.ndarray, numpy.ndarray]
        The nearest point on ``rho1 / rho1_bar + rho2 / rho2_bar = 1``.
    """
    a = 1.0 / rho1_bar
    b = 1.0 / rho2_bar
    shift = eos_residual(rho1, rho2, rho1_bar, rho2_bar) / (a * a + b * b)
    return np.asarray(rho1) - a * shift, np.asarray(rho2) - b * shift


def project_state_to_eos(state: FluidState, model: MixtureModel) -> FluidState:
    """Returns a copy of ``state`` whose cell densities lie on the EOS"""
    rho1, rho2 = project_pair_to_eos(state.rho1.values, state.rho2.values, model.rho1_bar, model.rho2_bar)
    projected = state.copy()
    projected.rho1 = _CellField(state.grid, rho1)
    projected.rho = _CellField(state.grid, rho1 + rho2)
    return projected


def max_eos_residual(state: FluidState, model: MixtureModel) -> float:
    residual = eos_residual(state.rho1.values, state.rho2.values, model.rho1_bar, model.rho2_bar)
    return float(np.abs(residual).max())
