# -*- coding: utf-8 -*-
"""Coupled velocity-pressure solver for the variable-coefficient Stokes system

The discrete system is

    theta rho v - div(eta (grad v + grad v^T)) + grad pi = f
    div v = h

on the MAC grid, with no-slip walls whose wall-normal faces carry identity
rows. It is solved with restarted GMRES, right-preconditioned by an
approximate block factorisation built from one multigrid Helmholtz cycle for
the velocity and a viscosity-weighted identity plus ``theta`` times a
density-weighted Poisson cycle for the pressure Schur complement.

The solve is always carried out for the increment from a reference state
on which the inhomogeneous wall data are imposed, so the Krylov iteration
only ever sees the homogeneous operator.
"""

import math as _math
from typing import List as _List
from typing import Optional as _Optional
from typing import Tuple as _Tuple

import numpy as np
from attrs import define, field, validators
from scipy.sparse.linalg import LinearOperator as _LinearOperator
from scipy.sparse.linalg import gmres as _gmres

from lowmix._common import get_logger as _get_logger
from lowmix._common import solver_log_level as _solver_log_level
from lowmix.exceptions import DomainError as _DomainError
from lowmix.exceptions import GeometryError as _GeometryError
from lowmix.exceptions import SolverError as _SolverError
from lowmix.grid import BCSpec as _BCSpec
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import NodeField as _NodeField
from lowmix.grid import apply_wall_normal as _apply_wall_normal
from lowmix.grid import divergence as _divergence
from lowmix.grid import gradient as _gradient
from lowmix.grid import viscous_operator as _viscous_operator
from lowmix.multigrid import HelmholtzHierarchy as _HelmholtzHierarchy
from lowmix.multigrid import PoissonHierarchy as _PoissonHierarchy

__all__ = [
    "SolverOptions",
    "StokesProblem",
    "StokesSolution",
    "apply_stokes_operator",
    "solve_stokes",
]

_logger = _get_logger(__name__)

_TOL_MODES = ("relative", "absolute")
_VERIFY_SLACK = 10.0
_COMPATIBILITY_TOL = 1e-8
_COMPATIBILITY_FLOOR = 1e-14


def _positive_int(instance: object, attribute: object, value: int) -> None:
    if value < 1:
        raise ValueError(f"invalid value for {getattr(attribute, 'name', '?')} ({value!r}), should be >= 1")


@define(frozen=True)
class SolverOptions:
    """Stokes solver settings

    Parameters
    ----------
    tol : float
        Convergence tolerance used by predictor solves.
    gmres_restart : int
        Krylov subspace size between restarts.
    gmres_maxiter : int
        Cap on the total number of GMRES iterations.
    mg_nu1, mg_nu2 : int
        Pre- and post-smoothing sweeps of the preconditioner V-cycles.
    mg_cycles_precond : int
        V-cycles per block in one preconditioner application.
    retries : int
        Extra GMRES runs, warm-started, when the verified residual misses the
        tolerance.
    """

    tol: float = field(default=1e-9, converter=float)
    gmres_restart: int = field(default=30, converter=int, validator=_positive_int)
    gmres_maxiter: int = field(default=100, converter=int, validator=_positive_int)
    mg_nu1: int = field(default=2, converter=int)
    mg_nu2: int = field(default=2, converter=int)
    mg_cycles_precond: int = field(default=1, converter=int, validator=_positive_int)
    retries: int = field(default=2, converter=int)


@define(eq=False)
class StokesProblem:
    """Data of one Stokes solve

    Parameters
    ----------
    theta : float
        Inverse time scale of the inertial term, zero for steady problems.
    rho_face : FaceField
        Density on the faces.
    eta_cell, eta_node : CellField, NodeField
        Viscosity for the diagonal and off-diagonal stresses.
    f : FaceField
        Force density. Entries on wall-normal boundary faces are ignored.
    h : CellField
        Prescribed velocity divergence.
    bc : BCSpec, optional
        Wall data; tangential wall velocities are evaluated at ``time``.
    time : float, optional
    reference : tuple[FaceField, CellField], optional
        Reference ``(v, pi)``; the increment from it is what GMRES solves for.
    """

    theta: float = field(converter=float)
    rho_face: _FaceField
    eta_cell: _CellField
    eta_node: _NodeField
    f: _FaceField
    h: _CellField
    bc: _BCSpec = field(factory=_BCSpec)
    time: float = 0.0
    reference: _Optional[_Tuple[_FaceField, _CellField]] = None

    def __attrs_post_init__(self) -> None:
        grid = self.grid
        for item in (self.rho_face, self.eta_cell, self.eta_node, self.f, self.h):
            if item.grid != grid:
                raise _GeometryError("all fields of a Stokes problem must share one grid")
        if self.theta < 0.0:
            raise _DomainError(f"invalid value for theta ({self.theta!r}), should be >= 0")
        if self.theta > 0.0 and min(self.rho_face.x.min(), self.rho_face.y.min()) <= 0.0:
            raise _DomainError("face density must be positive for an unsteady Stokes problem")
        if self.eta_cell.values.min() <= 0.0 or self.eta_node.values.min() <= 0.0:
            raise _DomainError("viscosity must be positive")

    @property
    def grid(self) -> _Grid:
        return self.f.grid

    @property
    def steady_periodic(self) -> bool:
        """Whether constant velocities are in the null space"""
        return self.theta == 0.0 and self.grid.periodic_x and self.grid.periodic_y


@define(eq=False)
class StokesSolution:
    """Velocity and mean-free pressure returned by :func:`solve_stokes`

    ``final_residual`` is the verified absolute residual norm of the full
    system; ``trace`` holds the per-iteration relative residual estimates.
    """

    v: _FaceField
    pi: _CellField
    iterations: int
    final_residual: float
    trace: _List[float] = field(factory=list)


def _wall_rows(problem: StokesProblem, velocity: _FaceField, out: _FaceField) -> _FaceField:
    """Overwrites the wall-normal rows of ``out`` with the wall condition residual"""
    grid = problem.grid
    bc = problem.bc
    if not grid.periodic_x:
        out.x[0, :] = velocity.x[0, :] - bc.x_lo.normal
        out.x[-1, :] = velocity.x[-1, :] - bc.x_hi.normal
    if not grid.periodic_y:
        out.y[:, 0] = velocity.y[:, 0] - bc.y_lo.normal
        out.y[:, -1] = velocity.y[:, -1] - bc.y_hi.normal
    return out


def apply_stokes_operator(
    problem: StokesProblem, v: _FaceField, pi: _CellField
) -> _Tuple[_FaceField, _CellField]:
    """Residuals of the Stokes equations at ``(v, pi)``

    Parameters
    ----------
    problem : StokesProblem
    v : FaceField
    pi : CellField

    Returns
    -------
    tuple[FaceField, CellField]
        ``theta rho v - div(eta grad v) + grad pi - f`` (on wall-normal faces,
        the velocity minus the prescribed normal velocity) and ``div v - h``.
    """
    if v.grid != problem.grid or pi.grid != problem.grid:
        raise _GeometryError("velocity and pressure must live on the problem grid")
    viscous = _viscous_operator(v, problem.eta_cell, problem.eta_node, problem.bc, problem.time)
    momentum = (problem.rho_face * v).scaled(problem.theta) - viscous + _gradient(pi) - problem.f
    momentum = _wall_rows(problem, v, momentum)
    div = _CellField(problem.grid, _divergence(v).values - problem.h.values)
    return momentum, div


class _Packing:
    def __init__(self, grid: _Grid) -> None:
        self.grid = grid
        self.nu = int(np.prod(grid.x_face_shape))
        self.nv = int(np.prod(grid.y_face_shape))
        self.np = int(np.prod(grid.shape))

    @property
    def size(self) -> int:
        return self.nu + self.nv + self.np

    def pack(self, velocity: _FaceField, pressure: np.ndarray) -> np.ndarray:
        return np.concatenate([velocity.x.ravel(), velocity.y.ravel(), pressure.ravel()])

    def unpack(self, vector: np.ndarray) -> _Tuple[_FaceField, np.ndarray]:
        vector = np.asarray(vector, dtype=float).ravel()
        u = vector[: self.nu].reshape(self.grid.x_face_shape)
        v = vector[self.nu : self.nu + self.nv].reshape(self.grid.y_face_shape)
        p = vector[self.nu + self.nv :].reshape(self.grid.shape)
        return _FaceField(self.grid, u, v), p


def _homogeneous_operator(problem: StokesProblem, packing: _Packing) -> _LinearOperator:
    homogeneous = problem.bc.homogeneous()
    grid = problem.grid

    def matvec(vector: np.ndarray) -> np.ndarray:
        velocity, pressure = packing.unpack(vector)
        viscous = _viscous_operator(velocity, problem.eta_cell, problem.eta_node, homogeneous)
        momentum = (problem.rho_face * velocity).scaled(problem.theta) - viscous
        momentum = momentum + _gradient(_CellField(grid, pressure))
        if not grid.periodic_x:
            momentum.x[[0, -1], :] = velocity.x[[0, -1], :]
        if not grid.periodic_y:
            momentum.y[:, [0, -1]] = velocity.y[:, [0, -1]]
        return packing.pack(momentum, _divergence(velocity).values)

    return _LinearOperator((packing.size, packing.size), matvec=matvec, dtype=float)


def _preconditioner(problem: StokesProblem, packing: _Packing, options: SolverOptions) -> _LinearOperator:
    """Block upper-triangular approximate inverse of the Stokes operator"""
    grid = problem.grid
    alpha = problem.rho_face.scaled(problem.theta)
    helmholtz = _HelmholtzHierarchy(
        alpha, problem.eta_cell, problem.eta_node, problem.bc, options.mg_nu1, options.mg_nu2
    )
    poisson = None
    if problem.theta > 0.0:
        inverse_rho = _FaceField(grid, 1.0 / problem.rho_face.x, 1.0 / problem.rho_face.y)
        poisson = _PoissonHierarchy(inverse_rho, options.mg_nu1, options.mg_nu2)
    eta = problem.eta_cell.values
    cycles = options.mg_cycles_precond

    def matvec(vector: np.ndarray) -> np.ndarray:
        residual_v, residual_p = packing.unpack(vector)
        residual_p = residual_p - residual_p.mean()
        pressure = eta * residual_p
        if poisson is not None:
            correction = np.zeros(grid.shape)
            for _ in range(cycles):
                correction = poisson.vcycle(correction, residual_p)
            pressure = pressure - problem.theta * correction
        pressure = pressure - pressure.mean()

        rhs = residual_v - _gradient(_CellField(grid, pressure))
        velocity = _FaceField.zeros(grid)
        for _ in range(cycles):
            velocity = helmholtz.vcycle(velocity, rhs)
        return packing.pack(velocity, pressure)

    return _LinearOperator((packing.size, packing.size), matvec=matvec, dtype=float)


def _reference(problem: StokesProblem) -> _Tuple[_FaceField, _CellField]:
    grid = problem.grid
    if problem.reference is None:
        velocity, pressure = _FaceField.zeros(grid), _CellField.zeros(grid)
    else:
        velocity, pressure = problem.reference[0].copy(), problem.reference[1].copy()
    return _apply_wall_normal(velocity, problem.bc), pressure


def _rhs_norm(problem: StokesProblem) -> float:
    forcing = _wall_rows(problem, _FaceField.zeros(problem.grid), problem.f.copy())
    return float(np.sqrt(np.sum(forcing.x**2) + np.sum(forcing.y**2) + np.sum(problem.h.values**2)))


def _residual_vector(
    problem: StokesProblem, packing: _Packing, velocity: _FaceField, pressure: _CellField
) -> np.ndarray:
    momentum, div = apply_stokes_operator(problem, velocity, pressure)
    if problem.steady_periodic:
        mean = (float(momentum.x.mean()), float(momentum.y.mean()))
        if mean != (0.0, 0.0):
            _logger.debug("steady periodic solve drops the mean momentum residual (%.3e, %.3e)", *mean)
        momentum = _FaceField(problem.grid, momentum.x - mean[0], momentum.y - mean[1])
    return packing.pack(momentum, div.values)


def _check_compatibility(rhs_p: np.ndarray, problem: StokesProblem, velocity: _FaceField) -> None:
    grid = problem.grid
    mismatch = abs(float(rhs_p.mean()))
    # roundoff in div v_ref scales with v_ref; rhs_p alone may be pure roundoff
    flux_scale = velocity.max_abs() * (1.0 / grid.dx + 1.0 / grid.dy)
    scale = max(float(np.abs(rhs_p).max()), float(np.abs(problem.h.values).max()), flux_scale)
    if mismatch > _COMPATIBILITY_TOL * scale + _COMPATIBILITY_FLOOR:
        raise _SolverError(
            f"divergence data are incompatible with the boundary fluxes (mean mismatch {mismatch:.3e})"
        )


def solve_stokes(
    problem: StokesProblem,
    tol: _Optional[float] = None,
    tol_mode: str = "relative",
    options: _Optional[SolverOptions] = None,
) -> StokesSolution:
    """Solves a Stokes problem with preconditioned GMRES

    Parameters
    ----------
    problem : StokesProblem
    tol : float, optional
        Residual tolerance; defaults to ``options.tol``.
    tol_mode : str, optional
        ``relative`` (to the norm of the right-hand side) or ``absolute``.
    options : SolverOptions, optional

    Returns
    -------
    StokesSolution
        The verified residual satisfies the requested tolerance.

    Raises
    ------
    SolverError
        When GMRES fails to reach the tolerance or the divergence data are
        incompatible with the boundary fluxes.

    Notes
    -----
    A steady problem on a doubly periodic grid only determines the velocity
    up to a constant, and a net body force has no steady solution there. The
    mean of the momentum residual is removed, so a nonzero mean of ``f`` is
    dropped (logged at debug level) and the returned velocity has the mean of
    the reference.
    """
    if tol_mode not in _TOL_MODES:
        raise ValueError(f"invalid value for tol_mode ({tol_mode!r}), should be relative|absolute")
    options = SolverOptions() if options is None else options
    tol = options.tol if tol is None else float(tol)
    grid = problem.grid
    packing = _Packing(grid)

    velocity, pressure = _reference(problem)
    initial = -_residual_vector(problem, packing, velocity, pressure)
    rhs_p = initial[packing.nu + packing.nv :]
    _check_compatibility(rhs_p, problem, velocity)
    initial[packing.nu + packing.nv :] = rhs_p - rhs_p.mean()
    initial_norm = float(np.linalg.norm(initial))

    if tol_mode == "relative":
        threshold = tol * (_rhs_norm(problem) or initial_norm)
    else:
        threshold = tol

    trace: _List[float] = []
    if initial_norm > threshold:
        operator = _homogeneous_operator(problem, packing)
        precond = _preconditioner(problem, packing, options)
        delta = np.zeros(packing.size)
        residual = initial_norm
        for attempt in range(options.retries + 1):
            remaining = options.gmres_maxiter - len(trace)
            if remaining <= 0:
                break
            delta, info = _gmres(
                operator,
                initial,
                x0=delta,
                rtol=0.0,
                atol=threshold,
                restart=min(options.gmres_restart, remaining),
                maxiter=_math.ceil(remaining / options.gmres_restart),
                M=precond,
                callback=trace.append,
                callback_type="pr_norm",
            )
            dv, dp = packing.unpack(delta)
            if problem.steady_periodic:
                dv = _FaceField(grid, dv.x - dv.x.mean(), dv.y - dv.y.mean())
            candidate_v = velocity + dv
            candidate_p = _CellField(grid, pressure.values + dp - (pressure.values + dp).mean())
            residual = float(np.linalg.norm(_residual_vector(problem, packing, candidate_v, candidate_p)))
            _logger.log(
                _solver_log_level(),
                "stokes attempt %d: info %d, %d iterations, residual %.3e (threshold %.3e)",
                attempt,
                info,
                len(trace),
                residual,
                threshold,
            )
            if info >= 0 and residual <= _VERIFY_SLACK * threshold:
                return StokesSolution(candidate_v, candidate_p, len(trace), residual, trace)
        raise _SolverError(
            f"GMRES did not converge: residual {residual:.3e} above {threshold:.3e} after {len(trace)} iterations",
            trace,
        )

    pressure = _CellField(grid, pressure.values - pressure.values.mean())
    residual = float(np.linalg.norm(_residual_vector(problem, packing, velocity, pressure)))
    return StokesSolution(velocity, pressure, 0, residual, trace)
