# -*- coding: utf-8 -*-
"""Spectral diagnostics of simulated fields

Static structure factors are accumulated from Fourier coefficients normalised
with ``1/N`` (``numpy.fft`` ``norm="forward"``) and stored as
``N * weight * |coef|^2``, so that a white field of variance ``s^2`` on cells
of volume ``dV`` gives the flat value ``dV s^2``. Only periodic axes are
transformed; spectra along a wall-bounded axis are averaged over it.

Time correlations are built from the Fourier modes of the vertically averaged
concentration and normalised by their lag-zero value. Closed-form predictions
for the nonequilibrium spectrum and the relaxation times of a stratified
mixture are provided by :func:`theory_curves`; they use the convention that a
stable stratification has ``rho * beta * g * h > 0``.
"""

import csv as _csv
import math as _math
import os as _os
import warnings as _warnings
from typing import Callable as _Callable
from typing import Dict as _Dict
from typing import List as _List
from typing import Mapping as _Mapping
from typing import Optional as _Optional
from typing import Sequence as _Sequence
from typing import Tuple as _Tuple
from typing import Union as _Union

import cachetools
import numpy as np
from attrs import define, field
from scipy.optimize import brentq as _brentq
from scipy.optimize import least_squares as _least_squares
from scipy.stats import linregress as _linregress

from lowmix._common import get_logger as _get_logger
from lowmix.exceptions import DomainError as _DomainError
from lowmix.exceptions import GeometryError as _GeometryError
from lowmix.exceptions import UnstableStratificationWarning as _UnstableStratificationWarning
from lowmix.grid import CellField as _CellField
from lowmix.integrators import Observer as _Observer
from lowmix.mixture import FluidState as _FluidState
from lowmix.mixture import MixtureModel as _MixtureModel

__all__ = [
    "SpectrumSeries",
    "CorrelationSeries",
    "FitResult",
    "TheoryParams",
    "effective_wavenumber",
    "static_structure_factor",
    "column_structure_factor",
    "vertical_average",
    "time_correlation",
    "fit_correlation",
    "fit_correlations",
    "theory_curves",
    "merge_spectra",
    "merge_correlations",
    "spectrum_slope",
    "table_name",
    "write_spectrum_csv",
    "write_correlation_csv",
    "write_fit_csv",
    "SpectrumObserver",
    "ColumnMeanObserver",
]

_logger = _get_logger(__name__)

FIT_MODELS = ("single-exp-offset", "double-exp", "oscillatory")
THEORY_MODES = ("S_k", "tau_overdamped", "tau_complex", "k_c", "k_p")
_MIN_FIT_POINTS = 10
_FIT_MAX_NFEV = 200


# --- wavenumbers ----------------------------------------------------------------


def effective_wavenumber(k_x: _Union[float, np.ndarray], dx: float) -> _Union[float, np.ndarray]:
    """Wavenumber seen by the discrete Laplacian, ``k sin(k dx / 2) / (k dx / 2)``

    Valid for ``|k dx| <= pi``; equals ``k`` only at zero.
    """
    value = (2.0 / dx) * np.sin(0.5 * np.asarray(k_x, dtype=float) * dx)
    if np.ndim(value) == 0:
        return float(value)
    return value


@cachetools.cached(cachetools.LRUCache(maxsize=32))
def _wavenumber_table(
    shape: _Tuple[int, ...], spacing: _Tuple[float, ...], periodic: _Tuple[bool, ...]
) -> _Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Integer mode indices, ``|k|``, ``|k_eff|`` and the sort order over the periodic axes"""
    axes = [axis for axis, flag in enumerate(periodic) if flag]
    if not axes:
        raise _GeometryError("a spectrum needs at least one periodic axis")
    counts = [np.rint(np.fft.fftfreq(shape[axis]) * shape[axis]).astype(int) for axis in axes]
    grids = np.meshgrid(*counts, indexing="ij")
    index = np.stack([g.ravel() for g in grids], axis=1)
    k_sq = np.zeros(index.shape[0])
    k_eff_sq = np.zeros(index.shape[0])
    for column, axis in enumerate(axes):
        length = shape[axis] * spacing[axis]
        k_axis = 2.0 * np.pi * index[:, column] / length
        k_sq += k_axis**2
        k_eff_sq += np.asarray(effective_wavenumber(k_axis, spacing[axis])) ** 2
    k = np.sqrt(k_sq)
    order = np.lexsort((index[:, -1], index[:, 0], k))
    tables = (index[order], k[order], np.sqrt(k_eff_sq)[order], order)
    for table in tables:
        table.setflags(write=False)
    return tables


# --- static structure factor ----------------------------------------------------


@define(eq=False)
class SpectrumSeries:
    """Running estimate of the static structure factor of a sampled field

    Parameters
    ----------
    shape : tuple of int
        Shape of one sample.
    spacing : tuple of float
        Grid spacing along each axis.
    periodic : tuple of bool
        Axes that are Fourier transformed.
    weight : float
        Volume factor of the spectrum, ``dV`` for cell fields.
    """

    shape: _Tuple[int, ...]
    spacing: _Tuple[float, ...]
    periodic: _Tuple[bool, ...]
    weight: float = 1.0
    sum_coef: np.ndarray = field(default=None)
    sum_power: np.ndarray = field(default=None)
    count: int = 0
    t_start: float = _math.nan
    t_end: float = _math.nan

    def __attrs_post_init__(self) -> None:
        if self.sum_coef is None:
            self.sum_coef = np.zeros(self.shape, dtype=complex)
        if self.sum_power is None:
            self.sum_power = np.zeros(self.shape)

    @property
    def _axes(self) -> _Tuple[int, ...]:
        return tuple(axis for axis, flag in enumerate(self.periodic) if flag)

    @property
    def _n_transformed(self) -> int:
        return int(np.prod([self.shape[axis] for axis in self._axes]))

    def add(self, values: np.ndarray, time: float = _math.nan) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != tuple(self.shape):
            raise _GeometryError(f"sample of shape {values.shape} does not match spectrum shape {self.shape}")
        coef = np.fft.fftn(values, axes=self._axes, norm="forward")
        self.sum_coef += coef
        self.sum_power += np.abs(coef) ** 2
        self.count += 1
        if self.count == 1:
            self.t_start = time
        self.t_end = time

    @property
    def window(self) -> float:
        return self.t_end - self.t_start

    @property
    def mode_index(self) -> np.ndarray:
        return _wavenumber_table(tuple(self.shape), tuple(self.spacing), tuple(self.periodic))[0]

    @property
    def k(self) -> np.ndarray:
        return _wavenumber_table(tuple(self.shape), tuple(self.spacing), tuple(self.periodic))[1]

    @property
    def k_eff(self) -> np.ndarray:
        return _wavenumber_table(tuple(self.shape), tuple(self.spacing), tuple(self.periodic))[2]

    @property
    def structure_factor(self) -> np.ndarray:
        """``S`` per mode, in the order of :attr:`k`; sample means are subtracted"""
        if self.count == 0:
            return np.zeros(len(self.k))
        mean_power = self.sum_power / self.count
        mean_coef = self.sum_coef / self.count
        full = self._n_transformed * self.weight * np.maximum(mean_power - np.abs(mean_coef) ** 2, 0.0)
        walls = tuple(axis for axis, flag in enumerate(self.periodic) if not flag)
        if walls:
            full = full.mean(axis=walls)
        order = _wavenumber_table(tuple(self.shape), tuple(self.spacing), tuple(self.periodic))[3]
        return full.ravel()[order]

    def average(self) -> float:
        """Average of ``S`` over all wavevectors except the zero mode"""
        return float(self.structure_factor[self.k > 0.0].mean())


def _spectrum_from_samples(
    samples: _Sequence[np.ndarray],
    spacing: _Tuple[float, ...],
    periodic: _Tuple[bool, ...],
    weight: float,
    times: _Optional[_Sequence[float]],
) -> SpectrumSeries:
    if len(samples) < 2:
        raise _DomainError(f"invalid value for samples ({len(samples)} given), should be >= 2")
    shape = tuple(np.shape(samples[0]))
    series = SpectrumSeries(shape, spacing, periodic, weight)
    for position, sample in enumerate(samples):
        series.add(sample, _math.nan if times is None else float(times[position]))
    return series


def static_structure_factor(
    samples: _Sequence[_CellField], dV: _Optional[float] = None, times: _Optional[_Sequence[float]] = None  # pylint: disable=C0103
) -> SpectrumSeries:
    """Structure factor ``dV <|d phi_k|^2>`` of a sequence of cell fields

    Parameters
    ----------
    samples : sequence of CellField
        At least two samples on the same grid.
    dV : float, optional
        Cell volume, ``grid.dV`` by default.
    times : sequence of float, optional
        Sample times, kept as window metadata.

    Returns
    -------
    SpectrumSeries
    """
    if len(samples) == 0:
        raise _DomainError("invalid value for samples (0 given), should be >= 2")
    grid = samples[0].grid
    for sample in samples:
        if sample.grid != grid:
            raise _GeometryError("samples live on different grids")
    weight = grid.dV if dV is None else float(dV)
    arrays = [sample.values for sample in samples]
    return _spectrum_from_samples(arrays, (grid.dx, grid.dy), (grid.periodic_x, grid.periodic_y), weight, times)


def column_structure_factor(
    columns: _Sequence[np.ndarray], dx: float, weight: float = 1.0, times: _Optional[_Sequence[float]] = None
) -> SpectrumSeries:
    """Structure factor of a series of vertically averaged profiles"""
    return _spectrum_from_samples([np.asarray(c, dtype=float) for c in columns], (dx,), (True,), weight, times)


def vertical_average(c: _CellField) -> np.ndarray:
    """Mean of a cell field over ``y``, one value per ``x`` column"""
    return c.values.mean(axis=1)


def merge_spectra(a: SpectrumSeries, b: SpectrumSeries) -> SpectrumSeries:
    """Pools the samples of two spectra of the same layout"""
    if (tuple(a.shape), tuple(a.spacing), tuple(a.periodic), a.weight) != (
        tuple(b.shape),
        tuple(b.spacing),
        tuple(b.periodic),
        b.weight,
    ):
        raise _GeometryError("cannot merge spectra with different layouts")
    times = [t for t in (a.t_start, a.t_end, b.t_start, b.t_end) if not _math.isnan(t)]
    return SpectrumSeries(
        a.shape,
        a.spacing,
        a.periodic,
        a.weight,
        a.sum_coef + b.sum_coef,
        a.sum_power + b.sum_power,
        a.count + b.count,
        min(times) if times else _math.nan,
        max(times) if times else _math.nan,
    )


def spectrum_slope(k: np.ndarray, s: np.ndarray, k_min: float, k_max: float) -> float:
    """Log-log slope of ``s(k)`` over ``[k_min, k_max]`` by linear regression"""

    mask = (k >= k_min) & (k <= k_max) & (k > 0.0) & (s > 0.0)
    if mask.sum() < 2:
        raise _DomainError(f"fewer than two positive modes in [{k_min}, {k_max}]")
    return float(_linregress(np.log(k[mask]), np.log(s[mask])).slope)


# --- time correlations ----------------------------------------------------------


@define(eq=False)
class CorrelationSeries:
    """Lagged covariances of the Fourier modes of a column-mean time series

    Modes ``kappa = 1 .. nx // 2`` are kept; the zero mode is not a fluctuation.
    """

    nx: int
    dx: float
    dt: float
    sums: np.ndarray
    counts: np.ndarray

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.counts.size)

    @property
    def times(self) -> np.ndarray:
        return self.lags * self.dt

    @property
    def mode_index(self) -> np.ndarray:
        return np.arange(1, self.sums.shape[0] + 1)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * self.mode_index / (self.nx * self.dx)

    @property
    def k_eff(self) -> np.ndarray:
        return np.asarray(effective_wavenumber(self.k, self.dx))

    @property
    def covariance(self) -> np.ndarray:
        return (self.sums / self.counts[None, :]).real

    def normalized(self) -> np.ndarray:
        """``C(tau; k) / C(0; k)``, shape ``(modes, lags)``"""
        cov = self.covariance
        zero = cov[:, :1]
        return np.divide(cov, zero, out=np.zeros_like(cov), where=zero > 0.0)


def time_correlation(
    columns: _Union[np.ndarray, _Sequence[np.ndarray]],
    lags: int,
    window: _Optional[int] = None,
    dt: float = 1.0,
    dx: float = 1.0,
) -> CorrelationSeries:
    """Time-averaged correlation of the Fourier modes of column means

    Parameters
    ----------
    columns : array_like, shape (n_samples, nx)
        Equally spaced profiles from :func:`vertical_average`.
    lags : int
        Largest lag, in samples.
    window : int, optional
        Length of the averaging window in sample intervals; the profiles
        ``columns[:window + 1]`` are used. All of them by default.
    dt : float, optional
        Time between samples.
    dx : float, optional
        Grid spacing along the profile.

    Returns
    -------
    CorrelationSeries
    """
    data = np.asarray(columns, dtype=float)
    if data.ndim != 2:
        raise _DomainError(f"invalid shape for columns ({data.shape}), should be (n_samples, nx)")
    if lags < 0:
        raise _DomainError(f"invalid value for lags ({lags!r}), should be >= 0")
    window = data.shape[0] - 1 if window is None else int(window)
    if window < lags:
        raise _DomainError(f"invalid value for window ({window!r}), should be >= the largest lag {lags}")
    if window > data.shape[0] - 1:
        raise _DomainError(f"invalid value for window ({window!r}), only {data.shape[0]} samples given")

    coef = np.fft.rfft(data[: window + 1], axis=1, norm="forward")[:, 1:]
    n_samples = coef.shape[0]
    sums = np.zeros((coef.shape[1], lags + 1), dtype=complex)
    counts = np.zeros(lags + 1)
    for lag in range(lags + 1):
        sums[:, lag] = (coef[lag:] * np.conj(coef[: n_samples - lag])).sum(axis=0)
        counts[lag] = n_samples - lag
    return CorrelationSeries(data.shape[1], float(dx), float(dt), sums, counts)


def merge_correlations(a: CorrelationSeries, b: CorrelationSeries) -> CorrelationSeries:
    """Pools the lagged products of two correlation series of the same layout"""
    if (a.nx, a.dx, a.dt, a.sums.shape) != (b.nx, b.dx, b.dt, b.sums.shape):
        raise _GeometryError("cannot merge correlations with different layouts")
    return CorrelationSeries(a.nx, a.dx, a.dt, a.sums + b.sums, a.counts + b.counts)


# --- fits -----------------------------------------------------------------------


@define
class FitResult:
    """Parameters of a fitted correlation model

    ``tau`` is the decay time: the fitted time constant for the single
    exponential and oscillatory models, the ``1/e`` crossing of the fitted
    curve for the double exponential.
    """

    model: str
    params: _Dict[str, float]
    tau: float
    gof: float
    converged: bool
    message: str = ""


def _single_exp_offset(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    tau, offset = p
    return (1.0 - offset) * np.exp(-t / tau) + offset


def _double_exp(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    alpha, tau1, tau2 = p
    return alpha * np.exp(-t / tau1) + (1.0 - alpha) * np.exp(-t / tau2)


def _oscillatory(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    tau, amplitude, period = p
    phase = 2.0 * np.pi * t / period
    return np.exp(-t / tau) * (amplitude * np.sin(phase) + np.cos(phase))


_MODEL_FUNCS: _Dict[str, _Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "single-exp-offset": _single_exp_offset,
    "double-exp": _double_exp,
    "oscillatory": _oscillatory,
}
_PARAM_NAMES = {
    "single-exp-offset": ("tau", "offset"),
    "double-exp": ("alpha", "tau1", "tau2"),
    "oscillatory": ("tau", "A", "T"),
}
# positions holding times, rescaled with the time axis
_TIME_PARAMS = {"single-exp-offset": (0,), "double-exp": (1, 2), "oscillatory": (0, 2)}


def _first_crossing(t: np.ndarray, y: np.ndarray, level: float) -> _Optional[float]:
    below = np.nonzero(y <= level)[0]
    if below.size == 0 or below[0] == 0:
        return None
    i = below[0]
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) * (t[i] - t[i - 1]) / (y1 - y0))


def _starts(model: str, t: np.ndarray, y: np.ndarray) -> _List[np.ndarray]:
    tau0 = _first_crossing(t, y, 1.0 / _math.e) or float(t[-1])
    if model == "single-exp-offset":
        return [np.array([tau0, 0.0])]
    if model == "double-exp":
        return [np.array([0.5, 0.5 * tau0, 2.0 * tau0]), np.array([0.9, tau0, 5.0 * tau0])]
    zero = _first_crossing(t, y, 0.0)
    period0 = 4.0 * zero if zero is not None else 4.0 * float(t[-1])
    return [np.array([tau0, 0.0, period0])]


def _bounds(model: str) -> _Tuple[np.ndarray, np.ndarray]:
    tiny = 1e-12
    if model == "single-exp-offset":
        return np.array([tiny, -1.0]), np.array([np.inf, 1.0])
    if model == "double-exp":
        return np.array([0.0, tiny, tiny]), np.array([1.0, np.inf, np.inf])
    return np.array([tiny, -np.inf, tiny]), np.array([np.inf, np.inf, np.inf])


def _e_fold_time(func: _Callable[[float], float], scale: float) -> float:
    target = 1.0 / _math.e
    hi = scale
    for _ in range(60):
        if func(hi) < target:
            return float(_brentq(lambda s: func(s) - target, 0.0, hi, xtol=1e-14 * scale, rtol=1e-14))
        hi *= 2.0
    return _math.inf


def fit_correlation(times: np.ndarray, values: np.ndarray, model: str = "double-exp") -> FitResult:
    """Fits a normalised correlation function by nonlinear least squares

    Parameters
    ----------
    times : array_like
        Lag times, starting at zero.
    values : array_like
        Normalised correlation, ``values[0] == 1``.
    model : str
        ``single-exp-offset``, ``double-exp`` or ``oscillatory``.

    Returns
    -------
    FitResult
        ``converged`` is False when the optimiser stopped without meeting its
        tolerances; no exception is raised in that case.
    """
    if model not in _MODEL_FUNCS:
        raise ValueError(f"invalid value for model ({model!r}), should be {'|'.join(FIT_MODELS)}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < _MIN_FIT_POINTS or t.size != y.size:
        raise _DomainError(f"invalid number of lag points ({t.size}), should be >= {_MIN_FIT_POINTS}")
    if abs(y[0] - 1.0) > 1e-8:
        raise _DomainError(f"invalid value for the zero-lag correlation ({float(y[0])!r}), should be 1")

    # fit in units of the last lag time so the result scales with the time axis
    scale = float(t[-1]) if t[-1] > 0 else 1.0
    ts = t / scale
    func = _MODEL_FUNCS[model]
    lower, upper = _bounds(model)

    best = None
    for start in _starts(model, ts, y):
        start = np.clip(start, lower + 1e-9, np.where(np.isfinite(upper), upper - 1e-9, np.inf))
        result = _least_squares(
            lambda p: func(p, ts) - y,
            start,
            bounds=(lower, upper),
            method="trf",
            ftol=1e-14,
            xtol=1e-14,
            gtol=1e-14,
            max_nfev=_FIT_MAX_NFEV,
        )
        if best is None or result.cost < best.cost:
            best = result

    params = best.x.copy()
    for position in _TIME_PARAMS[model]:
        params[position] *= scale
    named = dict(zip(_PARAM_NAMES[model], (float(p) for p in params)))
    if model == "double-exp":
        tau = _e_fold_time(lambda s: float(func(best.x, np.array([s]))[0]), max(best.x[1], best.x[2])) * scale
    else:
        tau = named["tau"]
    gof = float(np.sqrt(np.mean(best.fun**2)))
    converged = bool(best.success) and best.status > 0
    if not converged:
        _logger.warning("%s fit did not converge: %s", model, best.message)
    return FitResult(model, named, tau, gof, converged, str(best.message))


def fit_correlations(correlation: CorrelationSeries, oscillatory_modes: int = 4) -> _Dict[int, FitResult]:
    """Fits every mode: the smallest ``oscillatory_modes`` wavenumbers with the oscillatory model, the rest with
    the double exponential"""
    normalized = correlation.normalized()
    fits = {}
    for row, kappa in enumerate(correlation.mode_index):
        model = "oscillatory" if row < oscillatory_modes else "double-exp"
        fits[int(kappa)] = fit_correlation(correlation.times, normalized[row], model)
    return fits


# --- theory ---------------------------------------------------------------------


@define(frozen=True)
class TheoryParams:
    """Constant-coefficient parameters of the stratified-mixture predictions

    ``beta`` is the solutal expansion coefficient, ``g`` and ``h`` the
    gravity and concentration gradient entering the buoyancy product
    ``beta * g * h``, positive for a stable stratification.
    """

    eta: float
    chi: float
    rho: float
    beta: float
    g: float
    h: float
    kT: float  # pylint: disable=C0103

    def __attrs_post_init__(self) -> None:
        for name in ("eta", "chi", "rho"):
            value = getattr(self, name)
            if not value > 0.0:
                raise _DomainError(f"invalid value for {name} ({value!r}), should be > 0")

    @property
    def nu(self) -> float:
        return self.eta / self.rho

    @property
    def buoyancy(self) -> float:
        return self.beta * self.g * self.h


TheoryResult = _Union[float, _Callable[[np.ndarray], np.ndarray]]


def theory_curves(mode: str, params: TheoryParams) -> TheoryResult:
    """Closed-form predictions for giant fluctuations in a stratified mixture

    Parameters
    ----------
    mode : str
        ``S_k``: static structure factor ``kT h^2 / (eta chi k^4 + rho beta g h)``;
        ``tau_overdamped``: relaxation time ``1 / (chi k^2 (1 + rho beta g h / (eta chi k^4)))``;
        ``tau_complex``: the pair of relaxation times with inertia, complex
        for propagative modes;
        ``k_c``: rollover wavenumber; ``k_p``: onset of propagative modes.
    params : TheoryParams

    Returns
    -------
    callable or float
        A function of ``k`` for the curves, a number for the wavenumbers.
    """
    p = params
    if mode == "S_k":

        def structure(k: np.ndarray) -> np.ndarray:
            k = np.asarray(k, dtype=float)
            denominator = p.eta * p.chi * k**4 + p.rho * p.buoyancy
            if np.any(denominator <= 0.0):
                _warnings.warn(
                    "nonpositive structure factor denominator, unstable stratification",
                    _UnstableStratificationWarning,
                    stacklevel=2,
                )
            with np.errstate(divide="ignore"):
                return p.kT * p.h**2 / denominator

        return structure
    if mode == "tau_overdamped":

        def tau_overdamped(k: np.ndarray) -> np.ndarray:
            k = np.asarray(k, dtype=float)
            return 1.0 / (p.chi * k**2 * (1.0 + p.rho * p.buoyancy / (p.eta * p.chi * k**4)))

        return tau_overdamped
    if mode == "tau_complex":

        def tau_complex(k: np.ndarray) -> _Tuple[np.ndarray, np.ndarray]:
            k = np.asarray(k, dtype=float)
            mean = 0.5 * (p.nu + p.chi) * k**2
            root = 0.5 * np.sqrt((k**4 * (p.nu - p.chi) ** 2 - 4.0 * p.buoyancy).astype(complex))
            return 1.0 / (mean + root), 1.0 / (mean - root)

        return tau_complex
    if mode in ("k_c", "k_p"):
        if p.buoyancy <= 0.0:
            _warnings.warn(f"{mode} is undefined without stable stratification", _UnstableStratificationWarning)
            return _math.nan
        if mode == "k_c":
            return (p.rho * p.buoyancy / (p.eta * p.chi)) ** 0.25
        return (4.0 * p.buoyancy / p.nu**2) ** 0.25
    raise ValueError(f"invalid value for mode ({mode!r}), should be {'|'.join(THEORY_MODES)}")


# --- tables ---------------------------------------------------------------------


def _open_table(path: str):  # type: ignore[no-untyped-def]
    directory = _os.path.dirname(path)
    if directory:
        _os.makedirs(directory, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def table_name(prefix: str, t_end: float, window: float) -> str:
    """File name encoding the end time and the length of the averaging window"""
    return f"{prefix}_t{t_end:.6g}_w{window:.6g}.csv"


def write_spectrum_csv(path: str, series: SpectrumSeries) -> str:
    """Writes ``k_index, k, k_eff, S``; ``k_index`` joins the per-axis integers with ``:``"""
    with _open_table(path) as handle:
        writer = _csv.writer(handle)
        writer.writerow(["k_index", "k", "k_eff", "S"])
        for index, k, k_eff, s in zip(series.mode_index, series.k, series.k_eff, series.structure_factor):
            writer.writerow([":".join(str(int(i)) for i in index), repr(float(k)), repr(float(k_eff)), repr(float(s))])
    _logger.info("spectrum of %d samples written to %s", series.count, path)
    return path


def write_correlation_csv(path: str, correlation: CorrelationSeries) -> str:
    """Writes one row per lag with the normalised correlation of every mode"""
    normalized = correlation.normalized()
    with _open_table(path) as handle:
        writer = _csv.writer(handle)
        writer.writerow(["lag", "tau"] + [f"k{int(kappa)}" for kappa in correlation.mode_index])
        for lag, tau in zip(correlation.lags, correlation.times):
            writer.writerow([int(lag), repr(float(tau))] + [repr(float(v)) for v in normalized[:, lag]])
    _logger.info("correlation table written to %s", path)
    return path


def write_fit_csv(path: str, correlation: CorrelationSeries, fits: _Mapping[int, FitResult]) -> str:
    """Writes ``k_index, k, k_eff, tau, model, converged, params, gof`` for every fitted mode"""
    lookup = dict(zip((int(i) for i in correlation.mode_index), zip(correlation.k, correlation.k_eff)))
    with _open_table(path) as handle:
        writer = _csv.writer(handle)
        writer.writerow(["k_index", "k", "k_eff", "tau", "model", "converged", "params", "gof"])
        for kappa in sorted(fits):
            fit = fits[kappa]
            k, k_eff = lookup[kappa]
            params = ";".join(f"{name}={value!r}" for name, value in fit.params.items())
            writer.writerow(
                [kappa, repr(float(k)), repr(float(k_eff)), repr(fit.tau), fit.model, fit.converged, params, repr(fit.gof)]
            )
    return path


# --- observers ------------------------------------------------------------------


_SPECTRUM_FIELDS: _Dict[str, _Callable[[_FluidState], np.ndarray]] = {
    "rho": lambda state: state.rho.values,
    "rho1": lambda state: state.rho1.values,
    "concentration": lambda state: state.concentration.values,
    "column": lambda state: vertical_average(state.concentration),
}


@define
class SpectrumObserver(_Observer):
    """Accumulates the structure factor of a state field after ``start_step``

    ``column`` selects the vertically averaged concentration, whose spectrum
    is weighted by the column volume.
    """

    field_name: str = "rho"
    start_step: int = 0
    series: _Optional[SpectrumSeries] = None

    def __attrs_post_init__(self) -> None:
        if self.field_name not in _SPECTRUM_FIELDS:
            known = "|".join(_SPECTRUM_FIELDS)
            raise ValueError(f"invalid value for field_name ({self.field_name!r}), should be {known}")

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        if state.step < self.start_step:
            return
        if self.series is None:
            grid = state.grid
            if self.field_name == "column":
                weight = grid.dx * grid.lengths[1] * grid.dz_thickness
                self.series = SpectrumSeries((grid.nx,), (grid.dx,), (True,), weight)
            else:
                self.series = SpectrumSeries(grid.shape, (grid.dx, grid.dy), (grid.periodic_x, grid.periodic_y), grid.dV)
        self.series.add(_SPECTRUM_FIELDS[self.field_name](state), state.t)


@define
class ColumnMeanObserver(_Observer):
    """Records the vertically averaged concentration after ``start_step``"""

    start_step: int = 0
    times: _List[float] = field(factory=list)
    columns: _List[np.ndarray] = field(factory=list)
    dx: float = 1.0

    def observe(self, state: _FluidState, model: _MixtureModel) -> None:
        if state.step < self.start_step:
            return
        self.dx = state.grid.dx
        self.times.append(state.t)
        self.columns.append(vertical_average(state.concentration))

    def correlation(self, lags: int, window: _Optional[int] = None) -> CorrelationSeries:
        if len(self.times) < 2:
            raise _DomainError("fewer than two column samples recorded")
        dt = (self.times[-1] - self.times[0]) / (len(self.times) - 1)
        return time_correlation(np.array(self.columns), lags, window, dt, self.dx)
