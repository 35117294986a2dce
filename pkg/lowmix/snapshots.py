# -*- coding: utf-8 -*-
"""Field snapshot files and checkpoint bundles

Snapshot layout (all little-endian)::

    offset  size  content
    0       8     magic b"LMXSNAP1"
    8       4     nx (uint32)
    12      4     ny (uint32)
    16      8     dx (float64)
    24      8     dy (float64)
    32      8     field kind, ASCII, NUL padded: cell | face | node
    40      8     time (float64)
    48      ...   float64 values, row-major over [i, j]; face snapshots
                  store the x-face array followed by the y-face array

A plain-text sidecar ``<file>.meta`` (INI syntax, section ``[snapshot]``)
records the field name, the boundary kinds, the out-of-plane thickness, the
step index and the format version. Periodic boundaries are assumed when the
sidecar is missing.

Checkpoints are ``numpy.savez`` bundles holding the conserved variables, the
pressure, the time, the step counter and the random-stream cursor.
"""

import configparser as _configparser
import os as _os
from typing import Dict as _Dict
from typing import Optional as _Optional
from typing import Tuple as _Tuple
from typing import Union as _Union

import numpy as np
from attrs import define

from lowmix._common import get_logger as _get_logger
from lowmix.exceptions import ConfigError as _ConfigError
from lowmix.exceptions import GeometryError as _GeometryError
from lowmix.grid import CellField as _CellField
from lowmix.grid import FaceField as _FaceField
from lowmix.grid import Grid as _Grid
from lowmix.grid import NodeField as _NodeField
from lowmix.mixture import FluidState as _FluidState

__all__ = [
    "SNAPSHOT_MAGIC",
    "CHECKPOINT_VERSION",
    "Snapshot",
    "Checkpoint",
    "write_snapshot",
    "read_snapshot",
    "write_checkpoint",
    "read_checkpoint",
]

_logger = _get_logger(__name__)

SNAPSHOT_MAGIC = b"LMXSNAP1"
SNAPSHOT_VERSION = 1
CHECKPOINT_VERSION = 1

_HEADER = np.dtype(
    [
        ("magic", "S8"),
        ("nx", "<u4"),
        ("ny", "<u4"),
        ("dx", "<f8"),
        ("dy", "<f8"),
        ("kind", "S8"),
        ("time", "<f8"),
    ]
)
_VALUES = np.dtype("<f8")

AnyField = _Union[_CellField, _FaceField, _NodeField]


@define(eq=False)
class Snapshot:
    """A field read back from disk together with its metadata"""

    field: AnyField
    time: float
    name: str = ""
    step: int = 0

    @property
    def kind(self) -> str:
        return _kind_of(self.field)

    @property
    def grid(self) -> _Grid:
        return self.field.grid


@define(eq=False)
class Checkpoint:
    state: _FluidState
    seed: int
    rng_cursor: int
    extra: _Dict[str, float]


def _kind_of(item: AnyField) -> str:
    if isinstance(item, _CellField):
        return "cell"
    if isinstance(item, _FaceField):
        return "face"
    if isinstance(item, _NodeField):
        return "node"
    raise TypeError(f"cannot write a snapshot of {type(item).__name__}")


def _sidecar_path(path: str) -> str:
    return f"{path}.meta"


def write_snapshot(path: str, item: AnyField, time: float, name: str = "", step: int = 0) -> str:
    """Writes one field snapshot and its metadata sidecar

    Parameters
    ----------
    path : str
        Target file; parent directories are created.
    item : CellField, FaceField or NodeField
    time : float
    name : str, optional
        Physical name recorded in the sidecar, e.g. ``concentration``.
    step : int, optional

    Returns
    -------
    str
        The path written.
    """
    kind = _kind_of(item)
    grid = item.grid
    directory = _os.path.dirname(path)
    if directory:
        _os.makedirs(directory, exist_ok=True)

    header = np.zeros((), dtype=_HEADER)
    header["magic"] = SNAPSHOT_MAGIC
    header["nx"], header["ny"] = grid.nx, grid.ny
    header["dx"], header["dy"] = grid.dx, grid.dy
    header["kind"] = kind.encode("ascii")
    header["time"] = time

    arrays = (item.x, item.y) if isinstance(item, _FaceField) else (item.values,)
    with open(path, "wb") as handle:
        handle.write(header.tobytes())
        for array in arrays:
            handle.write(np.ascontiguousarray(array, dtype=_VALUES).tobytes(order="C"))

    meta = _configparser.ConfigParser()
    meta["snapshot"] = {
        "format": f"lowmix-snapshot {SNAPSHOT_VERSION}",
        "name": name,
        "kind": kind,
        "time": repr(float(time)),
        "step": str(int(step)),
        "bc_x": grid.bc_x,
        "bc_y": grid.bc_y,
        "dz_thickness": repr(grid.dz_thickness),
    }
    with open(_sidecar_path(path), "w", encoding="utf-8") as handle:
        meta.write(handle)
    _logger.debug("wrote %s snapshot %s at t=%g", kind, path, time)
    return path


def _read_sidecar(path: str) -> _Dict[str, str]:
    sidecar = _sidecar_path(path)
    if not _os.path.exists(sidecar):
        return {}
    meta = _configparser.ConfigParser()
    meta.read(sidecar, encoding="utf-8")
    if "snapshot" not in meta:
        raise _ConfigError(f"snapshot sidecar {sidecar!r} has no [snapshot] section")
    return dict(meta["snapshot"])


def _shapes(kind: str, grid: _Grid) -> _Tuple[_Tuple[int, int], ...]:
    if kind == "cell":
        return (grid.shape,)
    if kind == "face":
        return (grid.x_face_shape, grid.y_face_shape)
    if kind == "node":
        return (grid.node_shape,)
    raise _GeometryError(f"unknown snapshot field kind {kind!r}")


def read_snapshot(path: str) -> Snapshot:
    """Reads a file written by :func:`write_snapshot`

    Raises
    ------
    GeometryError
        When the magic number, the kind or the payload size do not match.
    """
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < _HEADER.itemsize:
        raise _GeometryError(f"{path!r} is too short to be a snapshot")
    header = np.frombuffer(raw[: _HEADER.itemsize], dtype=_HEADER)[0]
    if bytes(header["magic"]) != SNAPSHOT_MAGIC:
        raise _GeometryError(f"{path!r} is not a lowmix snapshot")

    meta = _read_sidecar(path)
    grid = _Grid(
        int(header["nx"]),
        int(header["ny"]),
        float(header["dx"]),
        float(header["dy"]),
        float(meta.get("dz_thickness", 1.0)),
        meta.get("bc_x", "periodic"),
        meta.get("bc_y", "periodic"),
    )
    kind = bytes(header["kind"]).rstrip(b"\0").decode("ascii")
    shapes = _shapes(kind, grid)
    values = np.frombuffer(raw[_HEADER.itemsize :], dtype=_VALUES)
    expected = sum(int(np.prod(shape)) for shape in shapes)
    if values.size != expected:
        raise _GeometryError(f"{path!r} holds {values.size} values, expected {expected}")

    arrays = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(values[offset : offset + size].reshape(shape).astype(float))
        offset += size

    item: AnyField
    if kind == "cell":
        item = _CellField(grid, arrays[0])
    elif kind == "face":
        item = _FaceField(grid, arrays[0], arrays[1])
    else:
        item = _NodeField(grid, arrays[0])
    return Snapshot(item, float(header["time"]), meta.get("name", ""), int(meta.get("step", 0)))


def write_checkpoint(
    path: str, state: _FluidState, seed: int, rng_cursor: int, extra: _Optional[_Dict[str, float]] = None
) -> str:
    """Saves a restartable bundle of the state and the random-stream cursor

    The cursor is the step index the next draw will be keyed on; since
    streams are counter based it is all that is needed to resume them.
    """
    grid = state.grid
    directory = _os.path.dirname(path)
    if directory:
        _os.makedirs(directory, exist_ok=True)
    payload = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "grid_shape": np.array([grid.nx, grid.ny]),
        "grid_spacing": np.array([grid.dx, grid.dy, grid.dz_thickness]),
        "grid_bc": np.array([grid.bc_x, grid.bc_y]),
        "rho1": state.rho1.values,
        "rho": state.rho.values,
        "m_x": state.m.x,
        "m_y": state.m.y,
        "pi": state.pi.values,
        "t": np.array(state.t),
        "step": np.array(state.step),
        "seed": np.array(seed),
        "rng_cursor": np.array(rng_cursor),
    }
    for key, value in (extra or {}).items():
        payload[f"extra_{key}"] = np.array(value)
    with open(path, "wb") as handle:
        np.savez(handle, **payload)
    _logger.info("checkpoint written to %s at step %d", path, state.step)
    return path


def read_checkpoint(path: str) -> Checkpoint:
    """Restores a bundle written by :func:`write_checkpoint`"""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise _ConfigError(f"invalid value for checkpoint format_version ({version!r}), should be 1")
        nx, ny = (int(n) for n in data["grid_shape"])
        dx, dy, dz = (float(s) for s in data["grid_spacing"])
        bc_x, bc_y = (str(b) for b in data["grid_bc"])
        grid = _Grid(nx, ny, dx, dy, dz, bc_x, bc_y)
        state = _FluidState(
            _CellField(grid, data["rho1"]),
            _CellField(grid, data["rho"]),
            _FaceField(grid, data["m_x"], data["m_y"]),
            _CellField(grid, data["pi"]),
            float(data["t"]),
            int(data["step"]),
        )
        extra = {key[len("extra_") :]: float(data[key]) for key in data.files if key.startswith("extra_")}
        return Checkpoint(state, int(data["seed"]), int(data["rng_cursor"]), extra)
