# -*- coding: utf-8 -*-
"""Advective fluxes for cell scalars and staggered momentum

Two schemes are provided for cell-centred scalars. The centered scheme is
skew-adjoint and is the one to use for fluctuating runs. The BDS scheme
reconstructs a bilinear or quadratic profile in every cell and averages it
over the region of space that crosses each face during the step, following
the characteristics of a velocity held fixed over the step. It is
conservative, second order and, with limiting, does not create new extrema
for incompressible flows.
"""

import math as _math
from typing import Dict as _Dict
from typing import Optional as _Optional
from typing import Tuple as _Tuple

import numpy as np
from attrs import define, field, validators

from lowmix._decorators import finite_output as _finite_output
from lowmix.exceptions import CFLError as _CFLError
from lowmix.grid import BCSpec as _BCSpec
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import average_cell_to_face as _average_cell_to_face
from lowmix.grid import divergence as _divergence
from lowmix.grid import fill_ghosts as _fill_ghosts
from lowmix.mixture import MixtureModel as _MixtureModel
from lowmix.mixture import project_pair_to_eos as _project_pair_to_eos

__all__ = [
    "BdsOptions",
    "advective_cfl",
    "centered_scalar_flux",
    "bds_face_states",
    "bds_flux",
    "bds_density_fluxes",
    "project_face_pair_to_eos",
    "centered_momentum_advection",
]

_GAUSS = (0.5 - 0.5 / _math.sqrt(3.0), 0.5 + 0.5 / _math.sqrt(3.0))
_NODE_WEIGHTS = np.array([-1.0, 7.0, 7.0, -1.0]) / 12.0


@define(frozen=True)
class BdsOptions:
    """Options of the BDS scheme

    Parameters
    ----------
    reconstruction : str
        ``bilinear`` or ``quadratic``.
    limited : bool
        Scale each cell's reconstruction so that it stays inside the range
        of the surrounding 3x3 cell averages.
    eos_face_projection : bool
        Project the face values of (rho1, rho2) onto the EOS before forming
        fluxes.
    """

    reconstruction: str = field(default="bilinear", validator=validators.in_(("bilinear", "quadratic")))
    limited: bool = False
    eos_face_projection: bool = True


def advective_cfl(velocity: _FaceField, dt: float) -> float:
    """``max |v| dt / dx`` over both components"""
    grid = velocity.grid
    return float(max(np.abs(velocity.x).max() * dt / grid.dx, np.abs(velocity.y).max() * dt / grid.dy))


def centered_scalar_flux(phi: _CellField, velocity: _FaceField) -> _FaceField:
    """Advective flux ``phi v`` with ``phi`` averaged arithmetically to the faces"""
    return _average_cell_to_face(phi) * velocity


def _offset(padded: np.ndarray, layers: int, di: int, dj: int) -> np.ndarray:
    """Shifted view of a padded array over the cells ``-1 .. n``"""
    lo = layers - 1
    ni = padded.shape[0] - 2 * lo
    nj = padded.shape[1] - 2 * lo
    return padded[lo + di : lo + di + ni, lo + dj : lo + dj + nj]


def _bilinear_coefficients(padded: np.ndarray, grid: _Grid) -> _Dict[str, np.ndarray]:
    nodes_x = padded.shape[0] - 3
    nodes_y = padded.shape[1] - 3
    nodes = np.zeros((nodes_x, nodes_y))
    for p, wp in enumerate(_NODE_WEIGHTS):
        for q, wq in enumerate(_NODE_WEIGHTS):
            nodes += wp * wq * padded[p : p + nodes_x, q : q + nodes_y]

    ll, lr = nodes[:-1, :-1], nodes[1:, :-1]
    ul, ur = nodes[:-1, 1:], nodes[1:, 1:]
    zeros = np.zeros_like(ll)
    return {
        "s": _offset(padded, 3, 0, 0).copy(),
        "sx": 0.5 * (lr + ur - ll - ul) / grid.dx,
        "sy": 0.5 * (ul + ur - ll - lr) / grid.dy,
        "sxy": (ur - lr - ul + ll) / (grid.dx * grid.dy),
        "sxx": zeros,
        "syy": zeros.copy(),
    }


def _quadratic_coefficients(padded: np.ndarray, grid: _Grid) -> _Dict[str, np.ndarray]:
    centre = _offset(padded, 3, 0, 0)
    east, west = _offset(padded, 3, 1, 0), _offset(padded, 3, -1, 0)
    north, south = _offset(padded, 3, 0, 1), _offset(padded, 3, 0, -1)
    cross = (
        _offset(padded, 3, 1, 1) - _offset(padded, 3, 1, -1) - _offset(padded, 3, -1, 1) + _offset(padded, 3, -1, -1)
    )
    return {
        "s": centre.copy(),
        "sx": 0.5 * (east - west) / grid.dx,
        "sy": 0.5 * (north - south) / grid.dy,
        "sxy": 0.25 * cross / (grid.dx * grid.dy),
        "sxx": (east - 2.0 * centre + west) / grid.dx**2,
        "syy": (north - 2.0 * centre + south) / grid.dy**2,
    }


def _profile(coef: _Dict[str, np.ndarray], X: np.ndarray, Y: np.ndarray, hx: float, hy: float) -> np.ndarray:
    # pylint: disable=C0103
    return (
        coef["s"]
        + coef["sx"] * X
        + coef["sy"] * Y
        + coef["sxy"] * X * Y
        + 0.5 * coef["sxx"] * (X * X - hx * hx / 12.0)
        + 0.5 * coef["syy"] * (Y * Y - hy * hy / 12.0)
    )


def _candidate_points(coef: _Dict[str, np.ndarray], hx: float, hy: float):  # type: ignore[no-untyped-def]
    """Points of a cell where the reconstruction can attain its extremes"""
    half_x, half_y = 0.5 * hx, 0.5 * hy
    points = [(sx * half_x, sy * half_y) for sx in (-1.0, 1.0) for sy in (-1.0, 1.0)]
    sxx, syy, sxy = coef["sxx"], coef["syy"], coef["sxy"]
    if not (np.any(sxx) or np.any(syy)):
        return [(np.full_like(sxx, px), np.full_like(sxx, py)) for px, py in points]

    def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        return np.where(den != 0.0, -num / np.where(den != 0.0, den, 1.0), 0.0)

    candidates = [(np.full_like(sxx, px), np.full_like(sxx, py)) for px, py in points]
    for edge in (-half_x, half_x):
        y_star = np.clip(_safe_ratio(coef["sy"] + sxy * edge, syy), -half_y, half_y)
        candidates.append((np.full_like(sxx, edge), y_star))
    for edge in (-half_y, half_y):
        x_star = np.clip(_safe_ratio(coef["sx"] + sxy * edge, sxx), -half_x, half_x)
        candidates.append((x_star, np.full_like(sxx, edge)))

    det = sxx * syy - sxy * sxy
    safe = np.where(det != 0.0, det, 1.0)
    x_crit = np.where(det != 0.0, (-coef["sx"] * syy + coef["sy"] * sxy) / safe, 0.0)
    y_crit = np.where(det != 0.0, (-coef["sy"] * sxx + coef["sx"] * sxy) / safe, 0.0)
    candidates.append((np.clip(x_crit, -half_x, half_x), np.clip(y_crit, -half_y, half_y)))
    return candidates


def _limit(coef: _Dict[str, np.ndarray], padded: np.ndarray, grid: _Grid) -> _Dict[str, np.ndarray]:
    neighbours = np.stack([_offset(padded, 3, di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)])
    upper = neighbours.max(axis=0)
    lower = neighbours.min(axis=0)
    mean = coef["s"]

    alpha = np.ones_like(mean)
    for X, Y in _candidate_points(coef, grid.dx, grid.dy):  # pylint: disable=C0103
        deviation = _profile(coef, X, Y, grid.dx, grid.dy) - mean
        with np.errstate(divide="ignore", invalid="ignore"):
            over = np.where(deviation > 0.0, (upper - mean) / deviation, 1.0)
            under = np.where(deviation < 0.0, (lower - mean) / deviation, 1.0)
        alpha = np.minimum(alpha, np.clip(np.minimum(over, under), 0.0, 1.0))

    limited = dict(coef)
    for key in ("sx", "sy", "sxy", "sxx", "syy"):
        limited[key] = coef[key] * alpha
    return limited


def _reconstruct(phi: _CellField, opts: BdsOptions, bc: _BCSpec) -> _Dict[str, np.ndarray]:
    grid = phi.grid
    padded = _fill_ghosts(phi.values, grid, 3, rule=bc.ghost_rule, bc_type="neumann")
    if opts.reconstruction == "bilinear":
        coef = _bilinear_coefficients(padded, grid)
    else:
        coef = _quadratic_coefficients(padded, grid)
    if opts.limited:
        coef = _limit(coef, padded, grid)
    return coef


def _transpose(coef: _Dict[str, np.ndarray]) -> _Dict[str, np.ndarray]:
    return {
        "s": coef["s"].T,
        "sx": coef["sy"].T,
        "sy": coef["sx"].T,
        "sxy": coef["sxy"].T,
        "sxx": coef["syy"].T,
        "syy": coef["sxx"].T,
    }


def _segment_integral(  # pylint: disable=R0913
    coef: _Dict[str, np.ndarray], X: np.ndarray, lo: np.ndarray, hi: np.ndarray, hn: float, ht: float
) -> np.ndarray:
    # pylint: disable=C0103
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    offset = half / _math.sqrt(3.0)
    return half * (_profile(coef, X, mid - offset, hn, ht) + _profile(coef, X, mid + offset, hn, ht))


def _gather(coef: _Dict[str, np.ndarray], rows: np.ndarray, cols: np.ndarray) -> _Dict[str, np.ndarray]:
    return {key: value[rows, cols] for key, value in coef.items()}


def _sweep(  # pylint: disable=R0913,R0914
    coef: _Dict[str, np.ndarray],
    sources: np.ndarray,
    normal_velocity: np.ndarray,
    transverse_velocity: np.ndarray,
    spacing: _Tuple[float, float],
    periodic: _Tuple[bool, bool],
    step: float,
) -> np.ndarray:
    """Space-time averaged face states on the faces normal to the first axis

    ``coef`` and ``sources`` cover the cells ``-1 .. n`` of both axes.
    """
    hn, ht = spacing
    n_normal = coef["s"].shape[0] - 2
    n_trans = coef["s"].shape[1] - 2
    n_faces = normal_velocity.shape[0]

    i = np.arange(n_faces)[:, None]
    j = np.arange(n_trans)[None, :]
    positive = normal_velocity > 0.0
    upwind = np.where(positive, i - 1, i)
    if periodic[0]:
        velocity_cell = upwind % n_normal
    else:
        upwind = np.clip(upwind, 0, n_normal - 1)
        velocity_cell = upwind
    j_next = (j + 1) % n_trans if periodic[1] else j + 1
    w_bar = 0.5 * (transverse_velocity[velocity_cell, j] + transverse_velocity[velocity_cell, j_next])
    side = np.where(w_bar > 0.0, j - 1, j + 1)

    rows = upwind + 1
    main = _gather(coef, rows, np.broadcast_to(j + 1, rows.shape))
    neighbour = _gather(coef, rows, side + 1)
    x_face = np.where(positive, 0.5 * hn, -0.5 * hn)
    speed = np.abs(w_bar)
    rising = w_bar > 0.0
    half_t = 0.5 * ht

    total = np.zeros(normal_velocity.shape)
    for node in _GAUSS:
        tau = node * step
        X = x_face - normal_velocity * tau  # pylint: disable=C0103
        reach = speed * tau
        main_lo = np.where(rising, -half_t, -half_t + reach)
        main_hi = np.where(rising, half_t - reach, half_t)
        side_lo = np.where(rising, half_t - reach, -half_t)
        side_hi = np.where(rising, half_t, -half_t + reach)
        total += 0.5 * _segment_integral(main, X, main_lo, main_hi, hn, ht)
        total += 0.5 * _segment_integral(neighbour, X, side_lo, side_hi, hn, ht)
    states = total / ht
    return states + 0.5 * step * sources[rows, np.broadcast_to(j + 1, rows.shape)]


def bds_face_states(  # pylint: disable=R0913
    phi: _CellField,
    velocity: _FaceField,
    q: _Optional[_CellField],
    dt: float,
    opts: BdsOptions,
    bc: _Optional[_BCSpec] = None,
) -> _FaceField:
    """Time-averaged face values of ``phi`` from characteristic tracing

    Parameters
    ----------
    phi : CellField
        Scalar at the start of the interval.
    velocity : FaceField
        Advection velocity held fixed over the interval.
    q : CellField or None
        Source held fixed over the interval.
    dt : float
        Length of the interval.
    opts : BdsOptions
    bc : BCSpec, optional
        Selects the wall ghost-fill rule.

    Returns
    -------
    FaceField
        Face states; multiply by the face velocity for the fluxes.
    """
    grid = phi.grid
    bc = _BCSpec() if bc is None else bc
    cfl = advective_cfl(velocity, dt)
    if cfl > 1.0:
        raise _CFLError(f"advective CFL {cfl:.3g} exceeds 1, characteristic tracing is invalid")

    coef = _reconstruct(phi, opts, bc)
    source = -phi.values * _divergence(velocity).values
    if q is not None:
        source = source + q.values
    sources = _fill_ghosts(source, grid, 1, rule="copy")

    periodic = (grid.periodic_x, grid.periodic_y)
    face_x = _sweep(coef, sources, velocity.x, velocity.y, (grid.dx, grid.dy), periodic, dt)
    face_y = _sweep(
        _transpose(coef), sources.T, velocity.y.T, velocity.x.T, (grid.dy, grid.dx), periodic[::-1], dt
    ).T
    return _FaceField(grid, face_x, face_y)


@_finite_output("bds-flux")
def bds_flux(  # pylint: disable=R0913
    phi: _CellField,
    velocity: _FaceField,
    q: _Optional[_CellField],
    dt: float,
    opts: BdsOptions,
    bc: _Optional[_BCSpec] = None,
) -> _FaceField:
    """Time-averaged advective fluxes ``phi_f v_f`` of the BDS scheme

    The conservative update is ``phi + dt * (q - div(bds_flux(...)))``.
    """
    return bds_face_states(phi, velocity, q, dt, opts, bc) * velocity


def project_face_pair_to_eos(
    rho1_face: np.ndarray, rho2_face: np.ndarray, model: _MixtureModel
) -> _Tuple[np.ndarray, np.ndarray]:
    """L2 projection of extrapolated face densities onto the EOS line"""
    return _project_pair_to_eos(rho1_face, rho2_face, model.rho1_bar, model.rho2_bar)


@_finite_output("bds-density-flux")
def bds_density_fluxes(  # pylint: disable=R0913
    rho1: _CellField,
    rho: _CellField,
    velocity: _FaceField,
    q1: _Optional[_CellField],
    dt: float,
    opts: BdsOptions,
    model: _MixtureModel,
    bc: _Optional[_BCSpec] = None,
) -> _Tuple[_FaceField, _FaceField]:
    """BDS fluxes of ``rho1`` and ``rho`` with optional face EOS projection

    Returns
    -------
    tuple[FaceField, FaceField]
        Advective fluxes of ``rho1`` and of ``rho``.
    """
    face_rho1 = bds_face_states(rho1, velocity, q1, dt, opts, bc)
    face_rho = bds_face_states(rho, velocity, None, dt, opts, bc)
    if opts.eos_face_projection:
        x1, x2 = project_face_pair_to_eos(face_rho1.x, face_rho.x - face_rho1.x, model)
        y1, y2 = project_face_pair_to_eos(face_rho1.y, face_rho.y - face_rho1.y, model)
        face_rho1 = _FaceField(rho.grid, x1, y1)
        face_rho = _FaceField(rho.grid, x1 + x2, y1 + y2)
    return face_rho1 * velocity, face_rho * velocity


def _to_cells(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    if periodic:
        return 0.5 * (values + np.roll(values, -1, axis=axis))
    lo = [slice(None), slice(None)]
    hi = [slice(None), slice(None)]
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (values[tuple(lo)] + values[tuple(hi)])


def _to_nodes(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    """Average onto the staggered positions along ``axis``; wall nodes are zero"""
    if periodic:
        return 0.5 * (values + np.roll(values, 1, axis=axis))
    shape = list(values.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    interior = [slice(None), slice(None)]
    interior[axis] = slice(1, -1)
    out[tuple(interior)] = _to_cells(values, False, axis)
    return out


def _cell_to_face_diff(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    if periodic:
        return values - np.roll(values, 1, axis=axis)
    shape = list(values.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    interior = [slice(None), slice(None)]
    interior[axis] = slice(1, -1)
    out[tuple(interior)] = np.diff(values, axis=axis)
    return out


def _node_to_face_diff(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    if periodic:
        return np.roll(values, -1, axis=axis) - values
    return np.diff(values, axis=axis)


@_finite_output("momentum-advection")
def centered_momentum_advection(m: _FaceField, velocity: _FaceField) -> _FaceField:
    """Divergence of the advective momentum flux ``m v^T`` on the faces

    Fluxes through cell centres use face-to-cell averages and fluxes through
    nodes use face-to-node averages of both factors. The caller subtracts the
    result; wall-normal boundary rows are zero.
    """
    grid = m.grid
    px, py = grid.periodic_x, grid.periodic_y
    u, w = velocity.x, velocity.y

    flux_xx = _to_cells(m.x, px, 0) * _to_cells(u, px, 0)
    flux_xy = _to_nodes(m.x, py, 1) * _to_nodes(w, px, 0)
    div_x = _cell_to_face_diff(flux_xx, px, 0) / grid.dx + _node_to_face_diff(flux_xy, py, 1) / grid.dy

    flux_yy = _to_cells(m.y, py, 1) * _to_cells(w, py, 1)
    flux_yx = _to_nodes(m.y, px, 0) * _to_nodes(u, py, 1)
    div_y = _cell_to_face_diff(flux_yy, py, 1) / grid.dy + _node_to_face_diff(flux_yx, px, 0) / grid.dx

    if not px:
        div_x[[0, -1], :] = 0.0
    if not py:
        div_y[:, [0, -1]] = 0.0
    return _FaceField(grid, div_x, div_y)
