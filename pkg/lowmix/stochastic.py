# -*- coding: utf-8 -*-
"""Discretised stochastic momentum and mass fluxes

White-noise fields are drawn from counter-based streams keyed by
``(seed, step, stage, field)``, so any draw can be regenerated on demand and
the order in which fields are generated does not matter. The random fields
are stored as unit-variance arrays; the physical scalings are applied by
:func:`stochastic_mass_flux` and :func:`stochastic_stress_divergence`.
"""

import math as _math
from typing import List as _List
from typing import Sequence as _Sequence
from typing import Tuple as _Tuple
from typing import Union as _Union

import numpy as np
from attrs import define, field

from lowmix import config as _runtime
from lowmix.exceptions import DomainError as _DomainError
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import NodeField as _NodeField
from lowmix.grid import stress_divergence as _stress_divergence
from lowmix.mixture import Coefficients as _Coefficients
from lowmix.mixture import FluidState as _FluidState
from lowmix.mixture import MixtureModel as _MixtureModel
from lowmix.mixture import face_coefficient as _face_coefficient

__all__ = [
    "NoiseStream",
    "NoiseRealization",
    "sample_noise",
    "stochastic_mass_flux",
    "stochastic_stress_divergence",
    "mass_noise_variance",
]

_STAGES = {"A": 0, "B": 1}
_FIELD_XX, _FIELD_YY, _FIELD_XY, _FIELD_MASS_X, _FIELD_MASS_Y = range(5)


@define
class NoiseStream:
    """Source of reproducible white-noise fields

    Parameters
    ----------
    seed : int
        Master seed of the run.
    record : bool, optional
        Keep a log of every ``(step, which)`` pair drawn, in order.
    """

    seed: int = field(converter=int)
    record: bool = False
    history: _List[_Tuple[int, str]] = field(factory=list)

    def generator(self, step: int, stage: int, field_id: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(int(step), stage, field_id))
        return np.random.Generator(np.random.Philox(sequence))

    def normal(self, shape: _Tuple[int, int], step: int, stage: int, field_id: int) -> np.ndarray:
        return self.generator(step, stage, field_id).standard_normal(shape)


@define(eq=False)
class NoiseRealization:
    """One set of unit-variance noise fields for a grid

    ``w_xx`` and ``w_yy`` are the diagonal stress components on the cells,
    ``w_xy`` the off-diagonal component on the nodes and ``w_mass`` the mass
    flux noise on the faces.
    """

    grid: _Grid
    w_xx: np.ndarray
    w_yy: np.ndarray
    w_xy: np.ndarray
    w_mass: _FaceField
    key: _Tuple[int, ...] = ()

    @property
    def w_diag(self) -> _Tuple[_CellField, _CellField]:
        return (_CellField(self.grid, self.w_xx), _CellField(self.grid, self.w_yy))

    @property
    def w_offdiag(self) -> _NodeField:
        return _NodeField(self.grid, self.w_xy)

    def combine(self, other: "NoiseRealization") -> "NoiseRealization":
        """``(self + other) / sqrt(2)``, again of unit variance"""
        root = _math.sqrt(0.5)
        return NoiseRealization(
            self.grid,
            root * (self.w_xx + other.w_xx),
            root * (self.w_yy + other.w_yy),
            root * (self.w_xy + other.w_xy),
            (self.w_mass + other.w_mass).scaled(root),
            self.key + other.key,
        )


def sample_noise(grid: _Grid, step_index: int, which: str, rng_stream: NoiseStream) -> NoiseRealization:
    """Draws the noise fields of one stage of one step

    Parameters
    ----------
    grid : Grid
    step_index : int
        Index of the time step the draw belongs to.
    which : str
        ``A`` or ``B``; the two streams of a step are independent.
    rng_stream : NoiseStream

    Returns
    -------
    NoiseRealization
        Identical values for identical ``(seed, step_index, which)``.
    """
    if which not in _STAGES:
        raise ValueError(f"invalid value for which ({which!r}), should be A|B")
    stage = _STAGES[which]
    if rng_stream.record:
        rng_stream.history.append((int(step_index), which))

    w_mass = _FaceField(
        grid,
        rng_stream.normal(grid.x_face_shape, step_index, stage, _FIELD_MASS_X),
        rng_stream.normal(grid.y_face_shape, step_index, stage, _FIELD_MASS_Y),
    )
    return NoiseRealization(
        grid,
        rng_stream.normal(grid.shape, step_index, stage, _FIELD_XX),
        rng_stream.normal(grid.shape, step_index, stage, _FIELD_YY),
        rng_stream.normal(grid.node_shape, step_index, stage, _FIELD_XY),
        w_mass,
        (rng_stream.seed, int(step_index), stage),
    )


def _zero_wall_faces(flux: _FaceField) -> _FaceField:
    grid = flux.grid
    if not grid.periodic_x:
        flux.x[[0, -1], :] = 0.0
    if not grid.periodic_y:
        flux.y[:, [0, -1]] = 0.0
    return flux


def stochastic_mass_flux(
    state: _FluidState, model: _MixtureModel, dt: float, noise: NoiseRealization, enabled: bool = True
) -> _FaceField:
    """Stochastic part of the diffusive mass flux

    Parameters
    ----------
    state : FluidState
    model : MixtureModel
    dt : float
        Time interval the noise is averaged over (the half step in the
        first stage of the overdamped scheme).
    noise : NoiseRealization
    enabled : bool, optional
        When False an exact zero field is returned.

    Returns
    -------
    FaceField
        ``sqrt(2 chi rho mu_c^-1 k_B T / (dt dV)) W`` on every face, zero on
        wall faces.
    """
    grid = state.grid
    if not enabled:
        return _FaceField.zeros(grid)
    coefficient = _face_coefficient(state.concentration, model)
    if min(coefficient.x.min(), coefficient.y.min()) < 0.0:
        raise _DomainError("negative coefficient under the square root of the mass noise amplitude")

    scale = 2.0 / (dt * grid.dV)
    flux = _FaceField(
        grid,
        np.sqrt(scale * coefficient.x) * noise.w_mass.x,
        np.sqrt(scale * coefficient.y) * noise.w_mass.y,
    )
    return _zero_wall_faces(flux)


EtaFields = _Union[_Coefficients, _Tuple[_CellField, _NodeField]]


def _sqrt_eta(eta_fields: _Sequence[EtaFields]) -> _Tuple[np.ndarray, np.ndarray]:
    pairs = [item.eta if isinstance(item, _Coefficients) else item for item in eta_fields]
    if not pairs:
        raise ValueError("at least one viscosity field is required")
    root_cell = sum(np.sqrt(cell.values) for cell, _ in pairs) / len(pairs)
    root_node = sum(np.sqrt(node.values) for _, node in pairs) / len(pairs)
    return root_cell, root_node


def _wall_node_factor(grid: _Grid) -> np.ndarray:
    factor = np.ones(grid.node_shape)
    if not _runtime.wall_noise_sqrt2:
        return factor
    root2 = _math.sqrt(2.0)
    if not grid.periodic_x:
        factor[[0, -1], :] = root2
    if not grid.periodic_y:
        factor[:, [0, -1]] = root2
    return factor


def stochastic_stress_divergence(  # pylint: disable=R0913
    eta_fields: _Sequence[EtaFields],
    dt: float,
    dV: float,  # pylint: disable=C0103
    noise: NoiseRealization,
    kT: float,  # pylint: disable=C0103
    halfstep_scaling: bool = False,
    enabled: bool = True,
) -> _FaceField:
    """Divergence of the scaled symmetric stochastic stress

    Parameters
    ----------
    eta_fields : sequence of Coefficients or (CellField, NodeField)
        Viscosities whose square roots are averaged to form the amplitude;
        pass two entries for the ``(sqrt(eta^n) + sqrt(eta^n+1)) / 2`` form.
    dt : float
        Time step.
    dV : float
        Cell volume.
    noise : NoiseRealization
    kT : float
        Thermal energy.
    halfstep_scaling : bool, optional
        Use ``dt / 2`` in the amplitude.
    enabled : bool, optional
        When False an exact zero field is returned.

    Returns
    -------
    FaceField
        ``div(sqrt(eta kT / (dt dV)) (W + W^T))``; the symmetrised diagonal is
        ``2 W_ii`` and the off-diagonal ``sqrt(2) W_xy``.
    """
    grid = noise.grid
    if not enabled or kT == 0.0:
        return _FaceField.zeros(grid)
    step = 0.5 * dt if halfstep_scaling else dt
    amplitude = _math.sqrt(kT / (step * dV))
    root_cell, root_node = _sqrt_eta(eta_fields)

    tau_xx = 2.0 * amplitude * root_cell * noise.w_xx
    tau_yy = 2.0 * amplitude * root_cell * noise.w_yy
    tau_xy = _math.sqrt(2.0) * amplitude * root_node * noise.w_xy * _wall_node_factor(grid)
    return _stress_divergence(tau_xx, tau_yy, tau_xy, grid)


def mass_noise_variance(state: _FluidState, model: _MixtureModel, dt: float) -> _FaceField:
    """Expected per-face variance of :func:`stochastic_mass_flux`"""
    coefficient = _face_coefficient(state.concentration, model)
    return _zero_wall_faces(coefficient.scaled(2.0 / (dt * state.grid.dV)))
