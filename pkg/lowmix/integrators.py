# -*- coding: utf-8 -*-
"""Time integrators for the fluctuating low Mach number mixture equations

Two predictor-corrector schemes are provided. The inertial scheme is
semi-implicit: viscosity is treated with Crank-Nicolson, advection and mass
diffusion explicitly. The overdamped scheme drops inertia and obtains the
velocity from a steady Stokes solve at every stage, integrating the densities
with the implicit midpoint rule.

Both schemes update the densities first and then solve for a velocity whose
divergence is tied to the mass fluxes that were just used, so that the
equation of state is preserved to solver tolerance. Random fields are keyed
by the step index; the flux ``F^{n+1}`` computed at the end of step ``n``
uses the same draw as ``F^n`` at the start of step ``n + 1``.
"""

import time as _time
from typing import Callable as _Callable
from typing import Dict as _Dict
from typing import List as _List
from typing import Optional as _Optional
from typing import Sequence as _Sequence
from typing import Tuple as _Tuple

import numpy as np
from attrs import define, evolve, field, validators

from lowmix._common import advise as _advise
from lowmix._common import check_finite as _check_finite
from lowmix._common import field_arrays as _field_arrays
from lowmix._common import get_logger as _get_logger
from lowmix.advection import BdsOptions as _BdsOptions
from lowmix.advection import advective_cfl as _advective_cfl
from lowmix.advection import bds_density_fluxes as _bds_density_fluxes
from lowmix.advection import centered_momentum_advection as _centered_momentum_advection
from lowmix.advection import centered_scalar_flux as _centered_scalar_flux
from lowmix.exceptions import ConfigError as _ConfigError
from lowmix.exceptions import LowMixError as _LowMixError
from lowmix.grid import BCSpec as _BCSpec
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import NodeField as _NodeField
from lowmix.grid import apply_wall_normal as _apply_wall_normal
from lowmix.grid import average_cell_to_face as _average_cell_to_face
from lowmix.grid import divergence as _divergence
from lowmix.grid import gradient as _gradient
from lowmix.grid import viscous_operator as _viscous_operator
from lowmix.mixture import Coefficients as _Coefficients
from lowmix.mixture import FluidState as _FluidState
from lowmix.mixture import MixtureModel as _MixtureModel
from lowmix.mixture import eval_coefficients as _eval_coefficients
from lowmix.mixture import max_eos_residual as _max_eos_residual
from lowmix.mixture import project_state_to_eos as _project_state_to_eos
from lowmix.multigrid import PoissonHierarchy as _PoissonHierarchy
from lowmix.snapshots import write_checkpoint as _write_checkpoint
from lowmix.snapshots import write_snapshot as _write_snapshot
from lowmix.stochastic import NoiseRealization as _NoiseRealization
from lowmix.stochastic import NoiseStream as _NoiseStream
from lowmix.stochastic import sample_noise as _sample_noise
from lowmix.stochastic import stochastic_mass_flux as _stochastic_mass_flux
from lowmix.stochastic import stochastic_stress_divergence as _stochastic_stress_divergence
from lowmix.stokes import SolverOptions as _SolverOptions
from lowmix.stokes import StokesProblem as _StokesProblem
from lowmix.stokes import StokesSolution as _StokesSolution
from lowmix.stokes import solve_stokes as _solve_stokes

__all__ = [
    "StepParams",
    "StepDiagnostics",
    "RunResult",
    "Observer",
    "SnapshotObserver",
    "CheckpointObserver",
    "CallbackObserver",
    "mass_flux",
    "stability_numbers",
    "check_stability",
    "adaptive_dt",
    "project_initial_velocity",
    "inertial_step",
    "overdamped_step",
    "run",
]

_logger = _get_logger(__name__)

_SCHEMES = ("inertial", "overdamped")
_ADVECTION = ("centered", "bds")
_PROJECTION_CYCLES = 50


def _positive(instance: object, attribute: object, value: float) -> None:
    if not value > 0.0:
        raise _ConfigError(f"invalid value for {getattr(attribute, 'name', '?')} ({value!r}), should be > 0")


@define(frozen=True)
class StepParams:
    """Settings of one time step

    Parameters
    ----------
    dt : float
        Time step.
    scheme : str
        ``inertial`` or ``overdamped``.
    advection : str
        ``centered`` or ``bds``.
    bds : BdsOptions
        Options of the BDS scheme when selected.
    corrector_advective_form : str
        ``trapezoidal`` or ``midpoint`` form of the centered corrector flux.
    corrector_viscosity_source : str
        ``corrected`` uses the viscosity at the new concentration in the
        velocity corrector, ``predictor`` the predicted one.
    mass_noise, momentum_noise : bool
        Switches for the stochastic fluxes.
    bc : BCSpec
        Wall data.
    solver : SolverOptions
        Stokes solver settings.
    """

    dt: float = field(converter=float, validator=_positive)
    scheme: str = field(default="inertial", validator=validators.in_(_SCHEMES))
    advection: str = field(default="centered", validator=validators.in_(_ADVECTION))
    bds: _BdsOptions = field(factory=_BdsOptions)
    corrector_advective_form: str = field(default="trapezoidal", validator=validators.in_(("trapezoidal", "midpoint")))
    corrector_viscosity_source: str = field(default="corrected", validator=validators.in_(("corrected", "predictor")))
    mass_noise: bool = True
    momentum_noise: bool = True
    bc: _BCSpec = field(factory=_BCSpec)
    solver: _SolverOptions = field(factory=_SolverOptions)

    @property
    def deterministic(self) -> bool:
        return not (self.mass_noise or self.momentum_noise)


@define
class StepDiagnostics:
    """What one step reports back to :func:`run`"""

    gmres_iterations: _List[int] = field(factory=list)
    stokes_residuals: _List[float] = field(factory=list)
    eos_residual: float = 0.0
    cfl: float = 0.0


# --- building blocks ----------------------------------------------------------


def _densities_state(rho1: _CellField, rho: _CellField, template: _FluidState) -> _FluidState:
    return _FluidState(rho1, rho, template.m, template.pi, template.t, template.step)


def mass_flux(  # pylint: disable=R0913
    state: _FluidState,
    model: _MixtureModel,
    coefficients: _Coefficients,
    dt: float,
    noise: _NoiseRealization,
    enabled: bool = True,
) -> _FaceField:
    """Diffusive plus stochastic mass flux ``rho chi grad c + sqrt(2 chi rho mu^-1 kT / (dt dV)) W``

    The deterministic part vanishes on wall faces through the Neumann
    gradient; the stochastic part is zeroed there explicitly.
    """
    rho_face = _average_cell_to_face(state.rho)
    chi_face = _average_cell_to_face(coefficients.chi)
    deterministic = rho_face * chi_face * _gradient(state.concentration)
    return deterministic + _stochastic_mass_flux(state, model, dt, noise, enabled)


def _constraint(flux: _FaceField, model: _MixtureModel) -> _CellField:
    """``-div(beta rho^-1 F)`` with the material constant ``beta / rho``"""
    div = _divergence(flux)
    return _CellField(flux.grid, -model.beta_over_rho * div.values)


def _gravity(rho_face: _FaceField, model: _MixtureModel) -> _FaceField:
    gx, gy = model.gravity
    return _FaceField(rho_face.grid, rho_face.x * gx, rho_face.y * gy)


def _half_viscosity(coefficients: _Coefficients) -> _Tuple[_CellField, _NodeField]:
    grid = coefficients.eta_cell.grid
    return (
        _CellField(grid, 0.5 * coefficients.eta_cell.values),
        _NodeField(grid, 0.5 * coefficients.eta_node.values),
    )


def _scalar_fluxes(  # pylint: disable=R0913
    rho1: _CellField,
    rho: _CellField,
    velocity: _FaceField,
    q1: _CellField,
    dt: float,
    params: StepParams,
    model: _MixtureModel,
) -> _Tuple[_FaceField, _FaceField]:
    if params.advection == "bds":
        return _bds_density_fluxes(rho1, rho, velocity, q1, dt, params.bds, model, params.bc)
    return _centered_scalar_flux(rho1, velocity), _centered_scalar_flux(rho, velocity)


def _advance_densities(  # pylint: disable=R0913
    state: _FluidState,
    dt: float,
    flux: _FaceField,
    adv1: _FaceField,
    adv: _FaceField,
    stage: str,
) -> _Tuple[_CellField, _CellField]:
    grid = state.grid
    rho1 = state.rho1.values + dt * (_divergence(flux).values - _divergence(adv1).values)
    rho = state.rho.values - dt * _divergence(adv).values
    _check_finite(stage, rho1, rho)
    return _CellField(grid, rho1), _CellField(grid, rho)


def _half_sum(a: _FaceField, b: _FaceField) -> _FaceField:
    return (a + b).scaled(0.5)


def _corrector_tolerance(predictor: _StokesSolution, params: StepParams) -> _Tuple[float, str]:
    """Absolute tolerance equal to the predictor's achieved residual"""
    if predictor.final_residual > 0.0:
        return predictor.final_residual, "absolute"
    return params.solver.tol, "relative"


def _solve(
    problem: _StokesProblem,
    params: StepParams,
    diagnostics: StepDiagnostics,
    tol_spec: _Optional[_Tuple[float, str]] = None,
) -> _StokesSolution:
    tol, mode = (params.solver.tol, "relative") if tol_spec is None else tol_spec
    solution = _solve_stokes(problem, tol, mode, params.solver)
    _check_finite("stokes", *_field_arrays((solution.v, solution.pi)))
    diagnostics.gmres_iterations.append(solution.iterations)
    diagnostics.stokes_residuals.append(solution.final_residual)
    return solution


# --- stability ---------------------------------------------------------------


def stability_numbers(state: _FluidState, model: _MixtureModel, dt: float) -> _Dict[str, float]:
    """Advective, diffusive and viscous Courant numbers of a state"""
    grid = state.grid
    coefficients = _eval_coefficients(state.concentration, model)
    h2 = min(grid.dx, grid.dy) ** 2
    nu = coefficients.eta_cell.values / state.rho.values
    return {
        "advective": _advective_cfl(state.velocity, dt),
        "diffusive": float(coefficients.chi.values.max()) * dt / h2,
        "viscous": float(nu.max()) * dt / h2,
    }


def check_stability(state: _FluidState, model: _MixtureModel, params: StepParams) -> _Dict[str, float]:
    """Issues advisories for the explicit stability limits

    The advective Courant number should stay below one and the diffusive one
    below ``1 / (2 d)``. The viscous number is only reported.
    """
    numbers = stability_numbers(state, model, params.dt)
    if numbers["advective"] >= 1.0:
        _advise(f"advective CFL {numbers['advective']:.3g} at step {state.step} exceeds 1")
    if numbers["diffusive"] >= 0.25:
        _advise(f"diffusive Courant number {numbers['diffusive']:.3g} at step {state.step} exceeds 1/4")
    _logger.debug("stability numbers at step %d: %s", state.step, numbers)
    return numbers


def adaptive_dt(state: _FluidState, target_cfl: float, dt_max: float) -> float:
    """Largest time step not above ``dt_max`` with advective CFL at most ``target_cfl``"""
    if not 0.0 < target_cfl <= 1.0:
        raise _ConfigError(f"invalid value for target_cfl ({target_cfl!r}), should be in (0, 1]")
    speed_cfl = _advective_cfl(state.velocity, 1.0)
    if speed_cfl == 0.0:
        return float(dt_max)
    return float(min(dt_max, target_cfl / speed_cfl))


# --- initial condition ---------------------------------------------------------


def project_initial_velocity(
    state: _FluidState, model: _MixtureModel, params: StepParams, rng: _NoiseStream
) -> _FluidState:
    """Makes the initial velocity satisfy the divergence constraint

    The velocity is corrected by a density-weighted gradient,
    ``v - rho^-1 grad phi``, so that ``div v = -div(beta rho^-1 F)`` with the
    flux of the current step. Wall-normal velocities are reset to the wall
    data.
    """
    grid = state.grid
    coefficients = _eval_coefficients(state.concentration, model)
    noise = _sample_noise(grid, state.step, "A", rng)
    flux = mass_flux(state, model, coefficients, params.dt, noise, params.mass_noise)
    rho_face = state.rho_face()
    velocity = _apply_wall_normal(state.m / rho_face, params.bc)

    mismatch = _divergence(velocity).values - _constraint(flux, model).values
    inverse_rho = _FaceField(grid, 1.0 / rho_face.x, 1.0 / rho_face.y)
    poisson = _PoissonHierarchy(inverse_rho)
    phi = np.zeros(grid.shape)
    scale = max(float(np.abs(mismatch).max()), 1e-300)
    for _ in range(_PROJECTION_CYCLES):
        phi = poisson.vcycle(phi, mismatch)
        if np.abs(poisson.residual(phi, mismatch)).max() <= params.solver.tol * scale:
            break
    correction = _gradient(_CellField(grid, phi)) / rho_face
    velocity = _apply_wall_normal(velocity - correction, params.bc)
    projected = state.copy()
    projected.m = rho_face * velocity
    return projected


# --- inertial scheme ------------------------------------------------------------


def _inertial_step(  # pylint: disable=R0914,R0915
    state: _FluidState, model: _MixtureModel, params: StepParams, step_index: int, rng: _NoiseStream
) -> _Tuple[_FluidState, StepDiagnostics]:
    grid = state.grid
    dt = params.dt
    bc = params.bc
    t_new = state.t + dt
    diagnostics = StepDiagnostics()

    noise_now = _sample_noise(grid, step_index, "A", rng)
    noise_next = _sample_noise(grid, step_index + 1, "A", rng)

    # fluxes at t^n
    coef_n = _eval_coefficients(state.concentration, model)
    flux_n = mass_flux(state, model, coef_n, dt, noise_now, params.mass_noise)
    rho_face_n = state.rho_face()
    v_n = state.m / rho_face_n
    diagnostics.cfl = _advective_cfl(v_n, dt)

    # forward Euler predictor for the densities
    adv1, adv = _scalar_fluxes(state.rho1, state.rho, v_n, _divergence(flux_n), dt, params, model)
    rho1_p, rho_p = _advance_densities(state, dt, flux_n, adv1, adv, "density-predictor")
    predicted = _densities_state(rho1_p, rho_p, state)
    coef_p = _eval_coefficients(predicted.concentration, model)
    flux_p = mass_flux(predicted, model, coef_p, dt, noise_now, params.mass_noise)

    # Crank-Nicolson predictor for the velocity
    explicit_viscous = _viscous_operator(v_n, coef_n.eta_cell, coef_n.eta_node, bc, state.t).scaled(0.5)
    advection_n = _centered_momentum_advection(state.m, v_n)
    stress_n = _stochastic_stress_divergence(
        [coef_n], dt, grid.dV, noise_now, model.kT, enabled=params.momentum_noise
    )
    force = state.m.scaled(1.0 / dt) - advection_n + _gravity(rho_face_n, model) + explicit_viscous + stress_n
    rho_face_p = predicted.rho_face()
    predictor = _solve(
        _StokesProblem(
            1.0 / dt,
            rho_face_p,
            *_half_viscosity(coef_p),
            force,
            _constraint(flux_p, model),
            bc,
            t_new,
            (v_n, state.pi),
        ),
        params,
        diagnostics,
    )
    v_p = predictor.v
    m_p = rho_face_p * v_p

    # corrector for the densities
    flux_half = _half_sum(flux_n, flux_p)
    v_half = _half_sum(v_n, v_p)
    if params.advection == "bds":
        adv1, adv = _scalar_fluxes(state.rho1, state.rho, v_half, _divergence(flux_half), dt, params, model)
    elif params.corrector_advective_form == "trapezoidal":
        adv1 = _half_sum(_centered_scalar_flux(state.rho1, v_n), _centered_scalar_flux(rho1_p, v_p))
        adv = _half_sum(_centered_scalar_flux(state.rho, v_n), _centered_scalar_flux(rho_p, v_p))
    else:
        rho1_mid = _CellField(grid, 0.5 * (state.rho1.values + rho1_p.values))
        rho_mid = _CellField(grid, 0.5 * (state.rho.values + rho_p.values))
        adv1 = _centered_scalar_flux(rho1_mid, v_half)
        adv = _centered_scalar_flux(rho_mid, v_half)
    rho1_new, rho_new = _advance_densities(state, dt, flux_half, adv1, adv, "density-corrector")
    corrected = _densities_state(rho1_new, rho_new, state)
    coef_new = _eval_coefficients(corrected.concentration, model)
    flux_new = mass_flux(corrected, model, coef_new, dt, noise_next, params.mass_noise)

    # corrector for the velocity
    coef_visc = coef_new if params.corrector_viscosity_source == "corrected" else coef_p
    rho_face_new = corrected.rho_face()
    advection_p = _centered_momentum_advection(m_p, v_p)
    stress = _stochastic_stress_divergence(
        [coef_n, coef_visc], dt, grid.dV, noise_now, model.kT, enabled=params.momentum_noise
    )
    gravity = _gravity(_half_sum(rho_face_n, rho_face_new), model)
    force = (
        state.m.scaled(1.0 / dt) - _half_sum(advection_n, advection_p) + gravity + explicit_viscous + stress
    )
    corrector = _solve(
        _StokesProblem(
            1.0 / dt,
            rho_face_new,
            *_half_viscosity(coef_visc),
            force,
            _constraint(flux_new, model),
            bc,
            t_new,
            (v_p, predictor.pi),
        ),
        params,
        diagnostics,
        _corrector_tolerance(predictor, params),
    )

    new_state = _FluidState(
        rho1_new, rho_new, rho_face_new * corrector.v, corrector.pi, t_new, step_index + 1
    )
    diagnostics.eos_residual = _max_eos_residual(new_state, model)
    return new_state, diagnostics


# --- overdamped scheme ----------------------------------------------------------


def _overdamped_step(  # pylint: disable=R0914
    state: _FluidState, model: _MixtureModel, params: StepParams, step_index: int, rng: _NoiseStream
) -> _Tuple[_FluidState, StepDiagnostics]:
    grid = state.grid
    dt = params.dt
    bc = params.bc
    half = 0.5 * dt
    diagnostics = StepDiagnostics()

    noise_a = _sample_noise(grid, step_index, "A", rng)
    noise_b = _sample_noise(grid, step_index, "B", rng)
    noise_ab = noise_a.combine(noise_b)

    # velocity at t^n from half-step noise
    coef_n = _eval_coefficients(state.concentration, model)
    flux_n = mass_flux(state, model, coef_n, half, noise_a, params.mass_noise)
    rho_face_n = state.rho_face()
    stress_a = _stochastic_stress_divergence(
        [coef_n], dt, grid.dV, noise_a, model.kT, halfstep_scaling=True, enabled=params.momentum_noise
    )
    first = _solve(
        _StokesProblem(
            0.0,
            rho_face_n,
            coef_n.eta_cell,
            coef_n.eta_node,
            stress_a + _gravity(rho_face_n, model),
            _constraint(flux_n, model),
            bc,
            state.t,
            (state.m / rho_face_n, state.pi),
        ),
        params,
        diagnostics,
    )
    v_n = first.v
    diagnostics.cfl = _advective_cfl(v_n, dt)

    # midpoint predictor for the densities
    adv1, adv = _scalar_fluxes(state.rho1, state.rho, v_n, _divergence(flux_n), half, params, model)
    rho1_h, rho_h = _advance_densities(state, half, flux_n, adv1, adv, "density-predictor")
    midpoint = _densities_state(rho1_h, rho_h, state)

    # velocity at the midpoint with the combined noise
    coef_h = _eval_coefficients(midpoint.concentration, model)
    flux_h = mass_flux(midpoint, model, coef_h, dt, noise_ab, params.mass_noise)
    rho_face_h = midpoint.rho_face()
    stress_ab = _stochastic_stress_divergence(
        [coef_h], dt, grid.dV, noise_ab, model.kT, enabled=params.momentum_noise
    )
    second = _solve(
        _StokesProblem(
            0.0,
            rho_face_h,
            coef_h.eta_cell,
            coef_h.eta_node,
            stress_ab + _gravity(rho_face_h, model),
            _constraint(flux_h, model),
            bc,
            state.t + half,
            (v_n, first.pi),
        ),
        params,
        diagnostics,
        _corrector_tolerance(first, params),
    )
    v_h = second.v

    # full-step corrector for the densities
    if params.advection == "bds":
        adv1, adv = _scalar_fluxes(state.rho1, state.rho, v_h, _divergence(flux_h), dt, params, model)
    else:
        adv1, adv = _centered_scalar_flux(rho1_h, v_h), _centered_scalar_flux(rho_h, v_h)
    rho1_new, rho_new = _advance_densities(state, dt, flux_h, adv1, adv, "density-corrector")

    rho_face_new = _average_cell_to_face(rho_new)
    new_state = _FluidState(rho1_new, rho_new, rho_face_new * v_h, second.pi, state.t + dt, step_index + 1)
    diagnostics.eos_residual = _max_eos_residual(new_state, model)
    return new_state, diagnostics


def inertial_step(
    state: _FluidState,
    model: _MixtureModel,
    params: StepParams,
    step_index: _Optional[int] = None,
    rng: _Optional[_NoiseStream] = None,
) -> _FluidState:
    """Advances the inertial equations by one semi-implicit trapezoidal step

    Parameters
    ----------
    state : FluidState
        State at ``t^n``; its velocity must satisfy the divergence constraint
        (see :func:`project_initial_velocity`).
    model : MixtureModel
    params : StepParams
    step_index : int, optional
        Key of the random draws, ``state.step`` by default.
    rng : NoiseStream, optional
        Seed 0 by default.

    Returns
    -------
    FluidState
        State at ``t^n + dt``; the pressure is the one at the midpoint.
    """
    step_index = state.step if step_index is None else step_index
    rng = _NoiseStream(0) if rng is None else rng
    return _inertial_step(state, model, params, step_index, rng)[0]


def overdamped_step(
    state: _FluidState,
    model: _MixtureModel,
    params: StepParams,
    step_index: _Optional[int] = None,
    rng: _Optional[_NoiseStream] = None,
) -> _FluidState:
    """Advances the overdamped equations by one midpoint predictor-corrector step

    The momentum of the returned state is the face density times the
    midpoint velocity; it is not used by the next step.
    """
    step_index = state.step if step_index is None else step_index
    rng = _NoiseStream(0) if rng is None else rng
    return _overdamped_step(state, model, params, step_index, rng)[0]


_STEPPERS: _Dict[
    str,
    _Callable[[_FluidState, _MixtureModel, StepParams, int, _NoiseStream], _Tuple[_FluidState, StepDiagnostics]],
] = {"inertial": _inertial_step, "overdamped": _overdamped_step}


# --- observers and the run loop -------------------------------------------------


@define
class Observer:
    """Callback invoked by :func:`run` every ``every`` steps, including step 0"""

    every: int = 1

    def wants(self, state: _FluidState) -> bool:
        return self.every > 0 and state.step % self.every == 0

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        raise NotImplementedError

    def close(self) -> None:
        """Called once after the last step"""


_SNAPSHOT_FIELDS: _Dict[str, _Callable[[_FluidState], object]] = {
    "concentration": lambda state: state.concentration,
    "rho1": lambda state: state.rho1,
    "rho": lambda state: state.rho,
    "pressure": lambda state: state.pi,
    "velocity": lambda state: state.velocity,
}


@define
class SnapshotObserver(Observer):
    """Writes ``<directory>/<field>_<step>.lmx`` snapshots"""

    directory: str = "."
    fields: _Tuple[str, ...] = ("concentration",)
    written: _List[str] = field(factory=list)

    def __attrs_post_init__(self) -> None:
        unknown = [name for name in self.fields if name not in _SNAPSHOT_FIELDS]
        if unknown:
            known = "|".join(_SNAPSHOT_FIELDS)
            raise _ConfigError(f"invalid value for snapshot fields ({unknown!r}), should be {known}")

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        for name in self.fields:
            path = f"{self.directory}/{name}_{state.step:08d}.lmx"
            self.written.append(
                _write_snapshot(path, _SNAPSHOT_FIELDS[name](state), state.t, name, state.step)  # type: ignore[arg-type]
            )


@define
class CheckpointObserver(Observer):
    """Writes ``<directory>/checkpoint_<step>.npz`` bundles"""

    directory: str = "."
    seed: int = 0
    written: _List[str] = field(factory=list)

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        if state.step == 0:
            return
        path = f"{self.directory}/checkpoint_{state.step:08d}.npz"
        self.written.append(_write_checkpoint(path, state, self.seed, state.step))


@define
class CallbackObserver(Observer):
    """Calls ``callback(state)``"""

    callback: _Optional[_Callable[[_FluidState], None]] = None

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        if self.callback is not None:
            self.callback(state)


@define(eq=False)
class RunResult:
    """Final state of :func:`run` and the invariant metrics gathered on the way"""

    state: _FluidState
    steps: int = 0
    max_gmres_iterations: int = 0
    max_cfl: float = 0.0
    max_eos_residual: float = 0.0
    max_eos_residual_projected: _Optional[float] = None
    mass_drift_rho1: float = 0.0
    mass_drift_rho: float = 0.0
    wall_time: float = 0.0
    dt_history: _List[float] = field(factory=list)

    def summary(self) -> _Dict[str, float]:
        summary = {
            "steps": self.steps,
            "time": self.state.t,
            "max_gmres_iterations": self.max_gmres_iterations,
            "max_cfl": self.max_cfl,
            "max_eos_residual": self.max_eos_residual,
            "mass_drift_rho1": self.mass_drift_rho1,
            "mass_drift_rho": self.mass_drift_rho,
            "wall_time": self.wall_time,
        }
        if self.max_eos_residual_projected is not None:
            summary["max_eos_residual_projected"] = self.max_eos_residual_projected
        return summary


def _relative_drift(initial: float, final: float) -> float:
    return abs(final - initial) / max(abs(initial), 1e-300)


def run(  # pylint: disable=R0912,R0913,R0914
    state0: _FluidState,
    model: _MixtureModel,
    params: StepParams,
    n_steps: int,
    observers: _Sequence[Observer] = (),
    rng: _Optional[_NoiseStream] = None,
    eos_projection_stride: int = 1,
    checkpoint_path: _Optional[str] = None,
    adaptive_cfl: _Optional[float] = None,
    project_initial: bool = True,
) -> RunResult:
    """Advances a state by ``n_steps`` steps of the scheme named in ``params``

    Parameters
    ----------
    state0 : FluidState
    model : MixtureModel
    params : StepParams
    n_steps : int
    observers : sequence of Observer, optional
        Invoked on the initial state and after every step, at their cadence.
    rng : NoiseStream, optional
        Seed 0 by default. Draws are keyed by the step counter of the state,
        so a run restored from a checkpoint continues the same streams.
    eos_projection_stride : int, optional
        Project the densities back onto the EOS every this many steps (every
        step by default); 0 disables the projection and leaves
        ``max_eos_residual_projected`` unset.
    checkpoint_path : str, optional
        Where to save the last good state if a step fails.
    adaptive_cfl : float, optional
        Target advective CFL of the adaptive time step; ``params.dt`` is then
        the upper bound. Only allowed without noise.
    project_initial : bool, optional
        Project the initial velocity of an inertial run that starts at step 0.

    Returns
    -------
    RunResult
    """
    if n_steps == 0:
        return RunResult(state0)
    if n_steps < 0:
        raise ValueError(f"invalid value for n_steps ({n_steps!r}), should be >= 0")
    if adaptive_cfl is not None and not params.deterministic:
        raise _ConfigError("adaptive time stepping requires the stochastic fluxes to be disabled")
    rng = _NoiseStream(0) if rng is None else rng
    stepper = _STEPPERS[params.scheme]
    started = _time.perf_counter()

    state = state0
    if params.scheme == "inertial" and project_initial and state.step == 0:
        state = project_initial_velocity(state, model, params, rng)
    result = RunResult(state)
    initial_rho1, initial_rho = state.rho1.total(), state.rho.total()
    for observer in observers:
        if observer.wants(state):
            observer.observe(state, model)

    report_every = max(1, n_steps // 10)
    last_good = state
    try:
        for count in range(1, n_steps + 1):
            step_params = params
            if adaptive_cfl is not None:
                step_params = evolve(params, dt=adaptive_dt(state, adaptive_cfl, params.dt))
            check_stability(state, model, step_params)

            state, diagnostics = stepper(state, model, step_params, state.step, rng)
            last_good = state
            result.dt_history.append(step_params.dt)
            result.max_cfl = max(result.max_cfl, diagnostics.cfl)
            result.max_gmres_iterations = max([result.max_gmres_iterations] + diagnostics.gmres_iterations)
            result.max_eos_residual = max(result.max_eos_residual, diagnostics.eos_residual)

            if eos_projection_stride and state.step % eos_projection_stride == 0:
                state = _project_state_to_eos(state, model)
                last_good = state
                projected = _max_eos_residual(state, model)
                result.max_eos_residual_projected = max(result.max_eos_residual_projected or 0.0, projected)
                _logger.debug("EOS projection at step %d: %.3e -> %.3e", state.step, diagnostics.eos_residual, projected)

            for observer in observers:
                if observer.wants(state):
                    observer.observe(state, model)
            if count % report_every == 0:
                _logger.info(
                    "step %d t=%.6g cfl=%.3g gmres=%s eos=%.2e",
                    state.step,
                    state.t,
                    diagnostics.cfl,
                    diagnostics.gmres_iterations,
                    diagnostics.eos_residual,
                )
    except _LowMixError:
        if checkpoint_path is not None:
            _logger.warning("step %d failed, saving the last good state to %s", last_good.step, checkpoint_path)
            _write_checkpoint(checkpoint_path, last_good, rng.seed, last_good.step)
        raise
    finally:
        for observer in observers:
            observer.close()

    result.state = state
    result.steps = n_steps
    result.mass_drift_rho1 = _relative_drift(initial_rho1, state.rho1.total())
    result.mass_drift_rho = _relative_drift(initial_rho, state.rho.total())
    result.wall_time = _time.perf_counter() - started
    return result
