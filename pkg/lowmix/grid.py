# -*- coding: utf-8 -*-
"""Uniform two-dimensional staggered (MAC) grid, field containers and discrete operators

Scalars live at cell centres, velocity-like quantities on the faces normal to
their component and off-diagonal stresses on the nodes (cell corners). Every
axis is either periodic or bounded by two walls. On a periodic axis the face
and node arrays wrap, so there are ``n`` of them; on a wall axis the boundary
faces and nodes are stored explicitly, giving ``n + 1``.

Arrays are indexed ``[i, j]`` with ``i`` along x.
"""

from typing import Callable as _Callable
from typing import Optional as _Optional
from typing import Tuple as _Tuple

import numpy as np
from attrs import Attribute, define, field, validators

from lowmix import config as _runtime
from lowmix._common import as_float_array as _as_float_array
from lowmix._common import ghost_weights as _ghost_weights
from lowmix.exceptions import DomainError as _DomainError
from lowmix.exceptions import GeometryError as _GeometryError

__all__ = [
    "Grid",
    "CellField",
    "FaceField",
    "NodeField",
    "WallSpec",
    "BCSpec",
    "divergence",
    "gradient",
    "average_cell_to_face",
    "average_cell_to_node",
    "average_face_to_cell",
    "fill_ghosts",
    "stress_divergence",
    "viscous_operator",
    "apply_wall_normal",
    "inner",
]

_BC_KINDS = ("periodic", "wall")


def _positive(instance: object, attribute: "Attribute[float]", value: float) -> None:
    if not value > 0.0:
        raise _DomainError(f"invalid value for {attribute.name} ({value!r}), should be > 0")


def _at_least_four(instance: object, attribute: "Attribute[int]", value: int) -> None:
    if value < 4:
        raise _DomainError(f"invalid value for {attribute.name} ({value!r}), should be >= 4")


@define(frozen=True)
class Grid:
    """A uniform 2D grid with per-axis boundary kinds

    Parameters
    ----------
    nx, ny : int
        Number of cells along x and y (at least 4 each).
    dx, dy : float
        Grid spacings.
    dz_thickness : float, optional
        Out-of-plane thickness; only enters the cell volume.
    bc_x, bc_y : str, optional
        ``periodic`` or ``wall``.
    """

    nx: int = field(converter=int, validator=_at_least_four)
    ny: int = field(converter=int, validator=_at_least_four)
    dx: float = field(converter=float, validator=_positive)
    dy: float = field(converter=float, validator=_positive)
    dz_thickness: float = field(default=1.0, converter=float, validator=_positive)
    bc_x: str = field(default="periodic", validator=validators.in_(_BC_KINDS))
    bc_y: str = field(default="periodic", validator=validators.in_(_BC_KINDS))

    @property
    def dV(self) -> float:  # pylint: disable=C0103
        """Volume of one cell"""
        return self.dx * self.dy * self.dz_thickness

    @property
    def periodic_x(self) -> bool:
        return self.bc_x == "periodic"

    @property
    def periodic_y(self) -> bool:
        return self.bc_y == "periodic"

    @property
    def shape(self) -> _Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x_face_shape(self) -> _Tuple[int, int]:
        return (self.nx if self.periodic_x else self.nx + 1, self.ny)

    @property
    def y_face_shape(self) -> _Tuple[int, int]:
        return (self.nx, self.ny if self.periodic_y else self.ny + 1)

    @property
    def node_shape(self) -> _Tuple[int, int]:
        return (
            self.nx if self.periodic_x else self.nx + 1,
            self.ny if self.periodic_y else self.ny + 1,
        )

    @property
    def lengths(self) -> _Tuple[float, float]:
        return (self.nx * self.dx, self.ny * self.dy)

    def cell_centers(self) -> _Tuple[np.ndarray, np.ndarray]:
        """Returns the (x, y) coordinates of the cell centres as 2D arrays"""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")  # type: ignore[return-value]

    def x_face_centers(self) -> _Tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.x_face_shape[0]) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")  # type: ignore[return-value]

    def y_face_centers(self) -> _Tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = np.arange(self.y_face_shape[1]) * self.dy
        return np.meshgrid(x, y, indexing="ij")  # type: ignore[return-value]

    def nodes(self) -> _Tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.node_shape[0]) * self.dx
        y = np.arange(self.node_shape[1]) * self.dy
        return np.meshgrid(x, y, indexing="ij")  # type: ignore[return-value]

    def can_coarsen(self, minimum: int = 4) -> bool:
        """Whether both dimensions are even and larger than ``minimum``"""
        return self.nx % 2 == 0 and self.ny % 2 == 0 and self.nx > minimum and self.ny > minimum

    def coarsen(self) -> "Grid":
        if self.nx % 2 or self.ny % 2:
            raise _GeometryError(f"cannot coarsen a {self.nx}x{self.ny} grid")
        return Grid(
            self.nx // 2, self.ny // 2, 2 * self.dx, 2 * self.dy, self.dz_thickness, self.bc_x, self.bc_y
        )

    def refine(self) -> "Grid":
        return Grid(
            2 * self.nx, 2 * self.ny, self.dx / 2, self.dy / 2, self.dz_thickness, self.bc_x, self.bc_y
        )


def _check_shape(values: np.ndarray, expected: _Tuple[int, int], what: str) -> None:
    if values.shape != expected:
        raise _GeometryError(f"{what} has shape {values.shape}, expected {expected}")


@define(eq=False)
class CellField:
    """Cell-centred scalar field"""

    grid: Grid
    values: np.ndarray = field(converter=_as_float_array)

    def __attrs_post_init__(self) -> None:
        _check_shape(self.values, self.grid.shape, "cell values")

    @classmethod
    def zeros(cls, grid: Grid) -> "CellField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "CellField":
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> "CellField":
        return CellField(self.grid, self.values.copy())

    def total(self) -> float:
        """Volume integral of the field"""
        return float(self.values.sum() * self.grid.dV)


@define(eq=False)
class FaceField:
    """MAC-staggered vector field with x components on x-faces and y components on y-faces"""

    grid: Grid
    x: np.ndarray = field(converter=_as_float_array)
    y: np.ndarray = field(converter=_as_float_array)

    def __attrs_post_init__(self) -> None:
        _check_shape(self.x, self.grid.x_face_shape, "x-face values")
        _check_shape(self.y, self.grid.y_face_shape, "y-face values")

    @classmethod
    def zeros(cls, grid: Grid) -> "FaceField":
        return cls(grid, np.zeros(grid.x_face_shape), np.zeros(grid.y_face_shape))

    @classmethod
    def full(cls, grid: Grid, value_x: float, value_y: float) -> "FaceField":
        return cls(grid, np.full(grid.x_face_shape, float(value_x)), np.full(grid.y_face_shape, float(value_y)))

    def copy(self) -> "FaceField":
        return FaceField(self.grid, self.x.copy(), self.y.copy())

    def scaled(self, factor: float) -> "FaceField":
        return FaceField(self.grid, self.x * factor, self.y * factor)

    def __add__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x + other.x, self.y + other.y)

    def __sub__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x - other.x, self.y - other.y)

    def __mul__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x * other.x, self.y * other.y)

    def __truediv__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.grid, self.x / other.x, self.y / other.y)

    def max_abs(self) -> float:
        return float(max(np.abs(self.x).max(), np.abs(self.y).max()))

    def ravel(self) -> np.ndarray:
        return np.concatenate([self.x.ravel(), self.y.ravel()])

    @classmethod
    def from_vector(cls, grid: Grid, vector: np.ndarray) -> "FaceField":
        n_x = grid.x_face_shape[0] * grid.x_face_shape[1]
        return cls(grid, vector[:n_x].reshape(grid.x_face_shape), vector[n_x:].reshape(grid.y_face_shape))


@define(eq=False)
class NodeField:
    """Node-centred scalar field (cell corners)"""

    grid: Grid
    values: np.ndarray = field(converter=_as_float_array)

    def __attrs_post_init__(self) -> None:
        _check_shape(self.values, self.grid.node_shape, "node values")

    @classmethod
    def zeros(cls, grid: Grid) -> "NodeField":
        return cls(grid, np.zeros(grid.node_shape))

    def copy(self) -> "NodeField":
        return NodeField(self.grid, self.values.copy())


WallFunction = _Callable[[np.ndarray, float], np.ndarray]


@define(frozen=True)
class WallSpec:
    """No-slip wall data

    ``tangential`` maps (position along the wall, time) to the tangential
    velocity; ``None`` is a stationary wall. ``normal`` is the velocity
    component along the positive axis on the wall faces.
    """

    tangential: _Optional[WallFunction] = None
    normal: float = 0.0

    def tangential_velocity(self, position: np.ndarray, time: float) -> np.ndarray:
        if self.tangential is None:
            return np.zeros_like(position, dtype=float)
        values = np.broadcast_to(np.asarray(self.tangential(position, time), dtype=float), position.shape)
        if not np.all(np.isfinite(values)):
            raise _DomainError(f"wall tangential velocity is not finite at t={time!r}")
        return values.copy()


_STATIONARY = WallSpec()


@define(frozen=True)
class BCSpec:
    """Boundary data for the wall sides of a grid

    Sides that are periodic on the grid ignore their entries. The scalar
    condition is zero normal mass flux (Neumann) on every wall.
    """

    x_lo: WallSpec = _STATIONARY
    x_hi: WallSpec = _STATIONARY
    y_lo: WallSpec = _STATIONARY
    y_hi: WallSpec = _STATIONARY
    ghost_rule: str = field(default="cubic", validator=validators.in_(("cubic", "copy")))
    wall_stencil: str = field(default="linear", validator=validators.in_(("linear", "quadratic")))

    def homogeneous(self) -> "BCSpec":
        """The same walls with all wall velocities set to zero"""
        return BCSpec(ghost_rule=self.ghost_rule, wall_stencil=self.wall_stencil)

    @property
    def is_homogeneous(self) -> bool:
        walls = (self.x_lo, self.x_hi, self.y_lo, self.y_hi)
        return all(wall.tangential is None and wall.normal == 0.0 for wall in walls)


def _periodic_diff_forward(values: np.ndarray, axis: int) -> np.ndarray:
    return np.roll(values, -1, axis=axis) - values


def _periodic_diff_backward(values: np.ndarray, axis: int) -> np.ndarray:
    return values - np.roll(values, 1, axis=axis)


def _face_to_cell_diff(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    if periodic:
        return _periodic_diff_forward(values, axis)
    return np.diff(values, axis=axis)


def _cell_to_face_diff(values: np.ndarray, periodic: bool, axis: int) -> np.ndarray:
    """Backward difference onto faces; wall boundary faces are zero"""
    if periodic:
        return _periodic_diff_backward(values, axis)
    shape = list(values.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    interior = [slice(None), slice(None)]
    interior[axis] = slice(1, -1)
    out[tuple(interior)] = np.diff(values, axis=axis)
    return out


def divergence(flux: FaceField) -> CellField:
    """Cell-centred divergence of a face field

    Parameters
    ----------
    flux : FaceField
        Face values, including wall boundary faces.

    Returns
    -------
    CellField
        ``(F_{i+1/2,j} - F_{i-1/2,j}) / dx + (F_{i,j+1/2} - F_{i,j-1/2}) / dy``
    """
    grid = flux.grid
    div = _face_to_cell_diff(flux.x, grid.periodic_x, 0) / grid.dx
    div += _face_to_cell_diff(flux.y, grid.periodic_y, 1) / grid.dy
    return CellField(grid, div)


def gradient(scalar: CellField) -> FaceField:
    """Face-centred gradient of a cell field

    On wall boundary faces the normal gradient is zero, which is the
    homogeneous Neumann condition used for the pressure and the mass flux.
    """
    grid = scalar.grid
    grad_x = _cell_to_face_diff(scalar.values, grid.periodic_x, 0) / grid.dx
    grad_y = _cell_to_face_diff(scalar.values, grid.periodic_y, 1) / grid.dy
    return FaceField(grid, grad_x, grad_y)


def _pad_axis(values: np.ndarray, layers: int, periodic: bool, axis: int, rule: str, bc_type: str) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (layers, layers)
    if periodic:
        return np.pad(values, pad, mode="wrap")
    if rule == "copy":
        return np.pad(values, pad, mode="symmetric")

    weights = _ghost_weights(bc_type, layers)
    padded = np.pad(values, pad, mode="edge")
    lo = np.moveaxis(values, axis, 0)[:3]
    hi = np.moveaxis(values, axis, 0)[::-1][:3]
    target = np.moveaxis(padded, axis, 0)
    for k in range(layers):
        # ghost k sits k + 1/2 spacings outside the wall
        target[layers - 1 - k] = np.tensordot(weights[k], lo, axes=(0, 0))
        target[-layers + k] = np.tensordot(weights[k], hi, axes=(0, 0))
    return padded


def fill_ghosts(values: np.ndarray, grid: Grid, layers: int, rule: str = "copy", bc_type: str = "neumann") -> np.ndarray:
    """Pads a cell array with ``layers`` ghost cells on every side

    Periodic axes wrap. Wall axes either mirror the interior (``copy``, the
    zero-gradient condition to first order) or use cubic extrapolation
    through three interior cells and the wall condition (``cubic``).
    Corner ghosts are filled by applying the x padding and then the y
    padding.

    Parameters
    ----------
    values : numpy.ndarray
        ``nx x ny`` cell values.
    grid : Grid
    layers : int
        Number of ghost layers (1 to 3).
    rule : str, optional
        ``copy`` or ``cubic``.
    bc_type : str, optional
        ``neumann`` (zero normal derivative) or ``dirichlet`` (zero wall value).

    Returns
    -------
    numpy.ndarray
        ``(nx + 2 layers) x (ny + 2 layers)`` array.
    """
    if rule not in {"copy", "cubic"}:
        raise ValueError(f"invalid value for rule ({rule!r}), should be copy|cubic")
    padded = _pad_axis(values, layers, grid.periodic_x, 0, rule, bc_type)
    return _pad_axis(padded, layers, grid.periodic_y, 1, rule, bc_type)


def _pair_average(a: np.ndarray, b: np.ndarray, rule: str) -> np.ndarray:
    if rule == "arithmetic":
        return 0.5 * (a + b)
    if rule == "harmonic":
        return 2.0 / (1.0 / a + 1.0 / b)
    raise ValueError(f"invalid value for rule ({rule!r}), should be arithmetic|harmonic")


def average_cell_to_face(scalar: CellField, rule: str = "arithmetic") -> FaceField:
    """Two-point average of a cell field onto the faces

    Wall boundary faces take the value of the adjacent cell.

    Parameters
    ----------
    scalar : CellField
    rule : str, optional
        ``arithmetic`` (default) or ``harmonic``.

    Returns
    -------
    FaceField
    """
    grid = scalar.grid
    values = scalar.values
    if rule == "harmonic" and not np.all(values > 0.0):
        raise _DomainError("harmonic averaging requires strictly positive values")

    padded = fill_ghosts(values, grid, 1, rule="copy")
    nfx = grid.x_face_shape[0]
    nfy = grid.y_face_shape[1]
    face_x = _pair_average(padded[0:nfx, 1:-1], padded[1 : nfx + 1, 1:-1], rule)
    face_y = _pair_average(padded[1:-1, 0:nfy], padded[1:-1, 1 : nfy + 1], rule)
    return FaceField(grid, face_x, face_y)


def average_cell_to_node(scalar: CellField, rule: _Optional[str] = None) -> NodeField:
    """Four-point average of a cell field onto the nodes

    The rule defaults to ``lowmix.config.node_average``.
    """
    rule = _runtime.node_average if rule is None else rule
    grid = scalar.grid
    if rule == "harmonic" and not np.all(scalar.values > 0.0):
        raise _DomainError("harmonic averaging requires strictly positive values")

    padded = fill_ghosts(scalar.values, grid, 1, rule="copy")
    nnx, nny = grid.node_shape
    corners = (
        padded[0:nnx, 0:nny],
        padded[1 : nnx + 1, 0:nny],
        padded[0:nnx, 1 : nny + 1],
        padded[1 : nnx + 1, 1 : nny + 1],
    )
    if rule == "arithmetic":
        node = 0.25 * sum(corners)
    elif rule == "harmonic":
        node = 4.0 / sum(1.0 / corner for corner in corners)
    else:
        raise ValueError(f"invalid value for rule ({rule!r}), should be arithmetic|harmonic")
    return NodeField(grid, node)


def average_face_to_cell(face: FaceField) -> _Tuple[np.ndarray, np.ndarray]:
    """Cell-centred averages of the two face components"""
    grid = face.grid
    if grid.periodic_x:
        cx = 0.5 * (face.x + np.roll(face.x, -1, axis=0))
    else:
        cx = 0.5 * (face.x[:-1] + face.x[1:])
    if grid.periodic_y:
        cy = 0.5 * (face.y + np.roll(face.y, -1, axis=1))
    else:
        cy = 0.5 * (face.y[:, :-1] + face.y[:, 1:])
    return cx, cy


def apply_wall_normal(velocity: FaceField, bc: _Optional[BCSpec] = None) -> FaceField:
    """Sets wall-normal boundary faces to the prescribed normal velocity, in place"""
    bc = BCSpec() if bc is None else bc
    grid = velocity.grid
    if not grid.periodic_x:
        velocity.x[0, :] = bc.x_lo.normal
        velocity.x[-1, :] = bc.x_hi.normal
    if not grid.periodic_y:
        velocity.y[:, 0] = bc.y_lo.normal
        velocity.y[:, -1] = bc.y_hi.normal
    return velocity


def _wall_derivative(interior: np.ndarray, wall_value: np.ndarray, spacing: float, stencil: str) -> np.ndarray:
    """One-sided derivative pointing into the domain at a wall

    ``interior`` holds the two nearest interior values along the wall normal,
    nearest first; the result is d/dn with n the inward normal.
    """
    if stencil == "linear":
        return 2.0 * (interior[0] - wall_value) / spacing
    return (9.0 * interior[0] - interior[1] - 8.0 * wall_value) / (3.0 * spacing)


def _shear_rate(velocity: FaceField, bc: BCSpec, time: float) -> np.ndarray:
    """du/dy + dv/dx on the nodes, using wall data for the tangential derivatives"""
    grid = velocity.grid
    u, v = velocity.x, velocity.y
    nnx, nny = grid.node_shape
    stencil = bc.wall_stencil

    if grid.periodic_y:
        du_dy = _periodic_diff_backward(u, 1) / grid.dy
    else:
        du_dy = np.zeros((nnx, nny))
        du_dy[:, 1:-1] = np.diff(u, axis=1) / grid.dy
        x_pos = np.arange(nnx) * grid.dx
        lo = bc.y_lo.tangential_velocity(x_pos, time)
        hi = bc.y_hi.tangential_velocity(x_pos, time)
        du_dy[:, 0] = _wall_derivative((u[:, 0], u[:, 1]), lo, grid.dy, stencil)
        du_dy[:, -1] = -_wall_derivative((u[:, -1], u[:, -2]), hi, grid.dy, stencil)

    if grid.periodic_x:
        dv_dx = _periodic_diff_backward(v, 0) / grid.dx
    else:
        dv_dx = np.zeros((nnx, nny))
        dv_dx[1:-1, :] = np.diff(v, axis=0) / grid.dx
        y_pos = np.arange(nny) * grid.dy
        lo = bc.x_lo.tangential_velocity(y_pos, time)
        hi = bc.x_hi.tangential_velocity(y_pos, time)
        dv_dx[0, :] = _wall_derivative((v[0, :], v[1, :]), lo, grid.dx, stencil)
        dv_dx[-1, :] = -_wall_derivative((v[-1, :], v[-2, :]), hi, grid.dx, stencil)

    return du_dy + dv_dx


def stress_divergence(tau_xx: np.ndarray, tau_yy: np.ndarray, tau_xy: np.ndarray, grid: Grid) -> FaceField:
    """Face-centred divergence of a symmetric stress

    Diagonal components live on cells, the off-diagonal one on nodes. Rows of
    wall-normal boundary faces are returned as zero.
    """
    div_x = _cell_to_face_diff(tau_xx, grid.periodic_x, 0) / grid.dx
    div_x += _face_to_cell_diff(tau_xy, grid.periodic_y, 1) / grid.dy
    div_y = _face_to_cell_diff(tau_xy, grid.periodic_x, 0) / grid.dx
    div_y += _cell_to_face_diff(tau_yy, grid.periodic_y, 1) / grid.dy
    if not grid.periodic_x:
        div_x[[0, -1], :] = 0.0
    if not grid.periodic_y:
        div_y[:, [0, -1]] = 0.0
    return FaceField(grid, div_x, div_y)


def viscous_operator(
    velocity: FaceField,
    eta_cell: CellField,
    eta_node: NodeField,
    bc: _Optional[BCSpec] = None,
    time: float = 0.0,
) -> FaceField:
    """Divergence of the viscous stress, div(eta (grad v + grad v^T))

    Parameters
    ----------
    velocity : FaceField
        Face velocities; wall-normal boundary faces are read as given.
    eta_cell : CellField
        Viscosity for the diagonal stresses.
    eta_node : NodeField
        Viscosity for the off-diagonal stress.
    bc : BCSpec, optional
        Wall data. The default is stationary no-slip walls.
    time : float, optional
        Time at which wall velocities are evaluated.

    Returns
    -------
    FaceField
        The viscous force density; wall-normal boundary rows are zero.
    """
    bc = BCSpec() if bc is None else bc
    grid = velocity.grid
    tau_xx = 2.0 * eta_cell.values * _face_to_cell_diff(velocity.x, grid.periodic_x, 0) / grid.dx
    tau_yy = 2.0 * eta_cell.values * _face_to_cell_diff(velocity.y, grid.periodic_y, 1) / grid.dy
    tau_xy = eta_node.values * _shear_rate(velocity, bc, time)
    return stress_divergence(tau_xx, tau_yy, tau_xy, grid)


def inner(a: FaceField, b: FaceField) -> float:
    """Volume-weighted inner product of two face fields"""
    weight = a.grid.dx * a.grid.dy
    return float(weight * (np.sum(a.x * b.x) + np.sum(a.y * b.y)))
