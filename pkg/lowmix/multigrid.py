# -*- coding: utf-8 -*-
"""Geometric multigrid for the pressure Poisson and velocity Helmholtz problems

Both solvers use V(nu1, nu2) cycles on a hierarchy obtained by halving the
grid while both dimensions are even and larger than four. Coarse operators
are rediscretised from coarsened coefficients. The pressure problem is
smoothed with red-black Gauss-Seidel, the face-centred velocity problem with
damped Jacobi.
"""

from typing import Callable as _Callable
from typing import List as _List
from typing import Optional as _Optional
from typing import Tuple as _Tuple

import cachetools
import numpy as np
from attrs import define

from lowmix._common import get_logger as _get_logger
from lowmix.grid import BCSpec as _BCSpec
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import NodeField as _NodeField
from lowmix.grid import fill_ghosts as _fill_ghosts
from lowmix.grid import viscous_operator as _viscous_operator

__all__ = [
    "grid_hierarchy",
    "PoissonHierarchy",
    "HelmholtzHierarchy",
    "multigrid_poisson",
    "multigrid_helmholtz",
]

_logger = _get_logger(__name__)

_JACOBI_WEIGHT = 2.0 / 3.0
_COARSE_SWEEPS = 40


@cachetools.cached(cachetools.LRUCache(maxsize=32))
def grid_hierarchy(grid: _Grid) -> _Tuple[_Grid, ...]:
    """Finest-first sequence of grids down to the coarsest admissible level"""
    levels = [grid]
    while levels[-1].can_coarsen():
        levels.append(levels[-1].coarsen())
    return tuple(levels)


def _coarse_sweeps(grid: _Grid) -> int:
    ratio = max(1, -(-max(grid.nx, grid.ny) // 4))
    return _COARSE_SWEEPS * ratio * ratio


# --- pressure ---------------------------------------------------------------


def _neighbour_weights(beta: _FaceField) -> _Tuple[np.ndarray, ...]:
    """West, east, south and north coupling weights of every cell; zero through walls"""
    grid = beta.grid
    wx = beta.x / grid.dx**2
    wy = beta.y / grid.dy**2
    if grid.periodic_x:
        west, east = wx, np.roll(wx, -1, axis=0)
    else:
        west, east = wx[:-1].copy(), wx[1:].copy()
        west[0] = 0.0
        east[-1] = 0.0
    if grid.periodic_y:
        south, north = wy, np.roll(wy, -1, axis=1)
    else:
        south, north = wy[:, :-1].copy(), wy[:, 1:].copy()
        south[:, 0] = 0.0
        north[:, -1] = 0.0
    return west, east, south, north


@define(eq=False)
class _PoissonLevel:
    grid: _Grid
    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray
    diagonal: np.ndarray
    colours: _Tuple[np.ndarray, np.ndarray]

    @classmethod
    def build(cls, beta: _FaceField) -> "_PoissonLevel":
        west, east, south, north = _neighbour_weights(beta)
        i, j = np.indices(beta.grid.shape)
        red = (i + j) % 2 == 0
        return cls(beta.grid, west, east, south, north, -(west + east + south + north), (red, ~red))

    def off_diagonal(self, p: np.ndarray) -> np.ndarray:
        return (
            self.west * np.roll(p, 1, axis=0)
            + self.east * np.roll(p, -1, axis=0)
            + self.south * np.roll(p, 1, axis=1)
            + self.north * np.roll(p, -1, axis=1)
        )

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.off_diagonal(p) + self.diagonal * p

    def smooth(self, p: np.ndarray, rhs: np.ndarray, sweeps: int) -> np.ndarray:
        for _ in range(sweeps):
            for colour in self.colours:
                update = (rhs - self.off_diagonal(p)) / self.diagonal
                p[colour] = update[colour]
        return p


def _coarsen_beta(beta: _FaceField, coarse: _Grid) -> _FaceField:
    x = 0.5 * (beta.x[::2, 0::2] + beta.x[::2, 1::2])
    y = 0.5 * (beta.y[0::2, ::2] + beta.y[1::2, ::2])
    return _FaceField(coarse, x, y)


def _restrict_cells(values: np.ndarray) -> np.ndarray:
    return 0.25 * (values[0::2, 0::2] + values[1::2, 0::2] + values[0::2, 1::2] + values[1::2, 1::2])


def _window(padded: np.ndarray, di: int, dj: int) -> np.ndarray:
    return padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]


def _prolong_cells(coarse_values: np.ndarray, coarse: _Grid, fine_shape: _Tuple[int, int]) -> np.ndarray:
    """Bilinear interpolation of a cell correction with weights 9/16, 3/16, 3/16 and 1/16"""
    padded = _fill_ghosts(coarse_values, coarse, 1, rule="copy")
    fine = np.empty(fine_shape)
    for a, di in ((0, -1), (1, 1)):
        for b, dj in ((0, -1), (1, 1)):
            fine[a::2, b::2] = (
                9.0 * coarse_values
                + 3.0 * _window(padded, di, 0)
                + 3.0 * _window(padded, 0, dj)
                + _window(padded, di, dj)
            ) / 16.0
    return fine


class PoissonHierarchy:
    """Multigrid solver for ``div(beta grad p) = rhs`` with homogeneous Neumann walls

    The constant mode is in the null space on every supported geometry, so the
    right-hand side is made mean-free and the solution is returned with zero
    mean.
    """

    def __init__(self, beta: _FaceField, nu1: int = 2, nu2: int = 2) -> None:
        self.nu1 = nu1
        self.nu2 = nu2
        grids = grid_hierarchy(beta.grid)
        coefficients = [beta]
        for coarse in grids[1:]:
            coefficients.append(_coarsen_beta(coefficients[-1], coarse))
        self.levels: _List[_PoissonLevel] = [_PoissonLevel.build(item) for item in coefficients]

    @property
    def grid(self) -> _Grid:
        return self.levels[0].grid

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.levels[0].apply(p)

    def residual(self, p: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        return rhs - rhs.mean() - self.apply(p)

    def _cycle(self, k: int, p: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        level = self.levels[k]
        if k == len(self.levels) - 1:
            p = level.smooth(p, rhs, _coarse_sweeps(level.grid))
            return p - p.mean()

        p = level.smooth(p, rhs, self.nu1)
        coarse_rhs = _restrict_cells(rhs - level.apply(p))
        correction = self._cycle(k + 1, np.zeros_like(coarse_rhs), coarse_rhs - coarse_rhs.mean())
        p += _prolong_cells(correction, self.levels[k + 1].grid, p.shape)
        return level.smooth(p, rhs, self.nu2)

    def vcycle(self, p: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """One V-cycle from ``p``; returns the updated mean-free iterate"""
        p = self._cycle(0, p.copy(), rhs - rhs.mean())
        return p - p.mean()


def multigrid_poisson(
    beta_face: _FaceField,
    rhs: _CellField,
    cycles: int = 10,
    initial: _Optional[_CellField] = None,
    nu1: int = 2,
    nu2: int = 2,
) -> _CellField:
    """Approximate solution of ``div(beta grad p) = rhs``

    Parameters
    ----------
    beta_face : FaceField
        Positive face coefficients; wall boundary faces are ignored.
    rhs : CellField
        Right-hand side; its mean is removed.
    cycles : int, optional
        Number of V-cycles.
    initial : CellField, optional
        Starting iterate, zero by default.
    nu1, nu2 : int, optional
        Pre- and post-smoothing sweeps.

    Returns
    -------
    CellField
        Mean-free approximate solution.
    """
    hierarchy = PoissonHierarchy(beta_face, nu1, nu2)
    p = np.zeros(rhs.grid.shape) if initial is None else initial.values.copy()
    for cycle in range(cycles):
        p = hierarchy.vcycle(p, rhs.values)
        _logger.debug("poisson cycle %d residual %.3e", cycle, np.abs(hierarchy.residual(p, rhs.values)).max())
    return _CellField(rhs.grid, p)


# --- velocity ---------------------------------------------------------------


def _axis_colours(count: int, periodic: bool) -> np.ndarray:
    colours = np.arange(count) % 3
    if periodic and count % 3:
        colours[-1] = 3
    return colours


def _probe_diagonal(apply: _Callable[[_FaceField], _FaceField], grid: _Grid) -> _FaceField:
    """Diagonal of a face operator with a stencil of radius one, by coloured probing"""
    diagonal = _FaceField.zeros(grid)
    for component, shape in (("x", grid.x_face_shape), ("y", grid.y_face_shape)):
        ci = _axis_colours(shape[0], grid.periodic_x)
        cj = _axis_colours(shape[1], grid.periodic_y)
        target = getattr(diagonal, component)
        for a in np.unique(ci):
            for b in np.unique(cj):
                mask = (ci[:, None] == a) & (cj[None, :] == b)
                probe = _FaceField.zeros(grid)
                setattr(probe, component, mask.astype(float))
                target[mask] = getattr(apply(probe), component)[mask]
    return diagonal


def _move(values: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(values, axis, 0)


def _full_weight_normal(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    """(1/4, 1/2, 1/4) weighting along the face-normal axis, sampled at even faces"""
    a = _move(values, axis)
    if periodic:
        weighted = 0.25 * np.roll(a, 1, axis=0) + 0.5 * a + 0.25 * np.roll(a, -1, axis=0)
    else:
        weighted = 0.5 * a.copy()
        weighted[1:-1] += 0.25 * (a[:-2] + a[2:])
        weighted[[0, -1]] = 0.0
    return np.moveaxis(weighted[::2], 0, axis)


def _pair_average(values: np.ndarray, axis: int) -> np.ndarray:
    a = _move(values, axis)
    return np.moveaxis(0.5 * (a[0::2] + a[1::2]), 0, axis)


def _restrict_faces(residual: _FaceField, coarse: _Grid) -> _FaceField:
    grid = residual.grid
    x = _pair_average(_full_weight_normal(residual.x, grid.periodic_x, 0), 1)
    y = _pair_average(_full_weight_normal(residual.y, grid.periodic_y, 1), 0)
    return _FaceField(coarse, x, y)


def _prolong_transverse(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    """Cell-centred linear interpolation (3/4, 1/4); walls reflect with a sign change"""
    a = _move(values, axis)
    if periodic:
        below, above = np.roll(a, 1, axis=0), np.roll(a, -1, axis=0)
    else:
        below = np.concatenate([-a[:1], a[:-1]])
        above = np.concatenate([a[1:], -a[-1:]])
    fine = np.empty((2 * a.shape[0],) + a.shape[1:])
    fine[0::2] = 0.75 * a + 0.25 * below
    fine[1::2] = 0.75 * a + 0.25 * above
    return np.moveaxis(fine, 0, axis)


def _prolong_normal(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    a = _move(values, axis)
    if periodic:
        fine = np.empty((2 * a.shape[0],) + a.shape[1:])
        fine[0::2] = a
        fine[1::2] = 0.5 * (a + np.roll(a, -1, axis=0))
    else:
        fine = np.empty((2 * a.shape[0] - 1,) + a.shape[1:])
        fine[0::2] = a
        fine[1::2] = 0.5 * (a[:-1] + a[1:])
    return np.moveaxis(fine, 0, axis)


def _prolong_faces(correction: _FaceField, fine: _Grid) -> _FaceField:
    coarse = correction.grid
    x = _prolong_normal(_prolong_transverse(correction.x, coarse.periodic_y, 1), coarse.periodic_x, 0)
    y = _prolong_normal(_prolong_transverse(correction.y, coarse.periodic_x, 0), coarse.periodic_y, 1)
    return _FaceField(fine, x, y)


def _coarsen_alpha(alpha: _FaceField, coarse: _Grid) -> _FaceField:
    return _FaceField(coarse, _pair_average(alpha.x[::2], 1), _pair_average(alpha.y[:, ::2], 0))


@define(eq=False)
class _HelmholtzLevel:
    alpha: _FaceField
    eta_cell: _CellField
    eta_node: _NodeField
    bc: _BCSpec
    diagonal: _Optional[_FaceField] = None

    @property
    def grid(self) -> _Grid:
        return self.alpha.grid

    def apply(self, velocity: _FaceField) -> _FaceField:
        out = self.alpha * velocity - _viscous_operator(velocity, self.eta_cell, self.eta_node, self.bc)
        grid = self.grid
        if not grid.periodic_x:
            out.x[[0, -1], :] = velocity.x[[0, -1], :]
        if not grid.periodic_y:
            out.y[:, [0, -1]] = velocity.y[:, [0, -1]]
        return out

    def smooth(self, velocity: _FaceField, rhs: _FaceField, sweeps: int, singular: bool) -> _FaceField:
        for _ in range(sweeps):
            residual = rhs - self.apply(velocity)
            velocity = velocity + (residual / self.diagonal).scaled(_JACOBI_WEIGHT)  # type: ignore[operator]
            if singular:
                velocity = _remove_mean(velocity)
        return velocity

    def coarsen(self, coarse: _Grid) -> "_HelmholtzLevel":
        eta_cell = _CellField(coarse, _restrict_cells(self.eta_cell.values))
        eta_node = _NodeField(coarse, self.eta_node.values[::2, ::2])
        return _HelmholtzLevel(_coarsen_alpha(self.alpha, coarse), eta_cell, eta_node, self.bc)


def _remove_mean(velocity: _FaceField) -> _FaceField:
    return _FaceField(velocity.grid, velocity.x - velocity.x.mean(), velocity.y - velocity.y.mean())


class HelmholtzHierarchy:
    """Multigrid solver for ``(alpha - div(eta (grad v + grad v^T))) v = rhs``

    Wall-normal boundary faces carry identity rows and tangential wall values
    are homogeneous Dirichlet. With ``alpha = 0`` on a doubly periodic grid the
    constant velocities form the null space and are projected out.
    """

    def __init__(  # pylint: disable=R0913
        self,
        alpha: _FaceField,
        eta_cell: _CellField,
        eta_node: _NodeField,
        bc: _Optional[_BCSpec] = None,
        nu1: int = 2,
        nu2: int = 2,
    ) -> None:
        self.nu1 = nu1
        self.nu2 = nu2
        bc = _BCSpec() if bc is None else bc.homogeneous()
        grid = alpha.grid
        self.singular = grid.periodic_x and grid.periodic_y and alpha.max_abs() == 0.0
        levels = [_HelmholtzLevel(alpha, eta_cell, eta_node, bc)]
        for coarse in grid_hierarchy(grid)[1:]:
            levels.append(levels[-1].coarsen(coarse))
        for level in levels:
            level.diagonal = _probe_diagonal(level.apply, level.grid)
        self.levels = levels

    @property
    def grid(self) -> _Grid:
        return self.levels[0].grid

    def apply(self, velocity: _FaceField) -> _FaceField:
        return self.levels[0].apply(velocity)

    def _cycle(self, k: int, velocity: _FaceField, rhs: _FaceField) -> _FaceField:
        level = self.levels[k]
        if k == len(self.levels) - 1:
            return level.smooth(velocity, rhs, _coarse_sweeps(level.grid), self.singular)

        velocity = level.smooth(velocity, rhs, self.nu1, self.singular)
        coarse_grid = self.levels[k + 1].grid
        coarse_rhs = _restrict_faces(rhs - level.apply(velocity), coarse_grid)
        correction = self._cycle(k + 1, _FaceField.zeros(coarse_grid), coarse_rhs)
        velocity = velocity + _prolong_faces(correction, level.grid)
        return level.smooth(velocity, rhs, self.nu2, self.singular)

    def vcycle(self, velocity: _FaceField, rhs: _FaceField) -> _FaceField:
        if self.singular:
            rhs = _remove_mean(rhs)
        return self._cycle(0, velocity, rhs)


def multigrid_helmholtz(  # pylint: disable=R0913
    alpha: _FaceField,
    eta_cell: _CellField,
    eta_node: _NodeField,
    rhs: _FaceField,
    cycles: int = 10,
    initial: _Optional[_FaceField] = None,
    bc: _Optional[_BCSpec] = None,
    nu1: int = 2,
    nu2: int = 2,
) -> _FaceField:
    """Approximate solution of the face-centred Helmholtz problem

    Parameters
    ----------
    alpha : FaceField
        ``theta rho`` on the faces, nonnegative.
    eta_cell, eta_node : CellField, NodeField
        Positive viscosities.
    rhs : FaceField
        Right-hand side; wall-normal boundary entries are the boundary values.
    cycles : int, optional
        Number of V-cycles.
    initial : FaceField, optional
    bc : BCSpec, optional
        Only the wall stencil is used; wall data are taken as zero.
    nu1, nu2 : int, optional

    Returns
    -------
    FaceField
    """
    hierarchy = HelmholtzHierarchy(alpha, eta_cell, eta_node, bc, nu1, nu2)
    velocity = _FaceField.zeros(rhs.grid) if initial is None else initial.copy()
    for cycle in range(cycles):
        velocity = hierarchy.vcycle(velocity, rhs)
        _logger.debug("helmholtz cycle %d residual %.3e", cycle, (rhs - hierarchy.apply(velocity)).max_abs())
    return velocity
