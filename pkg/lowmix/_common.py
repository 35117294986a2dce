import logging
import warnings
from typing import Any, Tuple

import attrs
import cachetools
import numpy as np

from lowmix import config
from lowmix.exceptions import CFLError, NonFiniteError, StabilityWarning

_BC_TYPES = ("neumann", "dirichlet")


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def solver_log_level() -> int:
    return logging.INFO if config.verbose else logging.DEBUG


def as_float_array(values: Any) -> np.ndarray:
    return np.array(values, dtype=np.float64, copy=True)


def check_finite(stage: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(stage)


def field_arrays(obj: Any) -> Tuple[np.ndarray, ...]:
    """Collects the numpy arrays carried by a field, state or tuple of them"""
    if obj is None:
        return ()
    if isinstance(obj, np.ndarray):
        return (obj,)
    if isinstance(obj, (tuple, list)):
        return tuple(array for item in obj for array in field_arrays(item))
    if not attrs.has(type(obj)):
        return ()
    arrays = []
    for attribute in attrs.fields(type(obj)):
        if attribute.name == "grid":
            continue
        value = getattr(obj, attribute.name)
        if isinstance(value, np.ndarray):
            arrays.append(value)
        elif isinstance(value, (tuple, list)) or attrs.has(type(value)):
            arrays.extend(field_arrays(value))
    return tuple(arrays)


@cachetools.cached(cachetools.LRUCache(maxsize=16))
def ghost_weights(bc_type: str, layers: int) -> np.ndarray:
    """Cubic extrapolation weights for wall ghost cells

    The cubic passes through the three nearest interior cell values (at 1/2,
    3/2 and 5/2 spacings from the wall) and satisfies a homogeneous wall
    condition at 0. Row ``k`` gives the ghost at ``-(k + 1/2)``.
    """
    if bc_type not in _BC_TYPES:
        raise ValueError(f"invalid value for bc_type ({bc_type!r}), should be neumann|dirichlet")

    points = np.array([0.5, 1.5, 2.5])
    system = np.zeros((4, 4))
    system[:3] = np.vander(points, 4, increasing=True)
    system[3] = [0.0, 1.0, 0.0, 0.0] if bc_type == "neumann" else [1.0, 0.0, 0.0, 0.0]

    ghosts = -(np.arange(layers) + 0.5)
    evaluation = np.vander(ghosts, 4, increasing=True)
    weights = np.linalg.solve(system.T, evaluation.T).T
    weights.setflags(write=False)
    return weights[:, :3]


def advise(message: str) -> None:
    """Reports a stability advisory, raising instead in strict mode"""
    if config.strict:
        raise CFLError(message)
    warnings.warn(message, StabilityWarning, stacklevel=3)
