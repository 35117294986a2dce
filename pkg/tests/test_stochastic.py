#!/usr/bin/env python

"""Tests for `lowmix.stochastic`."""

from contextlib import contextmanager

import numpy as np
import pytest

import lowmix
from lowmix.grid import CellField, FaceField, Grid
from lowmix.mixture import (
    ConstantModel,
    FluidState,
    IdealMixtureModel,
    LinearModel,
    MixtureModel,
    density_of_concentration,
    eval_coefficients,
)
from lowmix.stochastic import (
    NoiseStream,
    mass_noise_variance,
    sample_noise,
    stochastic_mass_flux,
    stochastic_stress_divergence,
)

MODEL = MixtureModel(2.0 / 3.0, 2.0, LinearModel(1.0, 10.0), ConstantModel(1.0), IdealMixtureModel(1.0, 2.0))
GRID = Grid(32, 32, 1.0, 1.0)


@contextmanager
def wall_noise_sqrt2(enabled):
    previous = lowmix.config.wall_noise_sqrt2
    lowmix.config.set_wall_noise_sqrt2(enabled)
    yield
    lowmix.config.set_wall_noise_sqrt2(previous)


def uniform_state(grid, c):
    rho = density_of_concentration(np.full(grid.shape, c), MODEL)
    return FluidState(CellField(grid, c * rho), CellField(grid, rho), FaceField.zeros(grid), CellField.zeros(grid))


class TestSampleNoise:
    @pytest.fixture
    def result(self):
        stream = NoiseStream(20221017)
        grid = Grid(1000, 1000, 1.0, 1.0)
        return sample_noise(grid, 0, "A", stream)

    def test_mean(self, result):
        assert abs(result.w_xx.mean()) < 4e-3

    def test_variance(self, result):
        assert result.w_xx.var() == pytest.approx(1.0, abs=6e-3)

    def test_deterministic(self):
        first = sample_noise(GRID, 17, "B", NoiseStream(3))
        second = sample_noise(GRID, 17, "B", NoiseStream(3))
        np.testing.assert_array_equal(first.w_xy, second.w_xy)
        np.testing.assert_array_equal(first.w_mass.x, second.w_mass.x)

    def test_stages_independent(self):
        stream = NoiseStream(3)
        a = sample_noise(GRID, 5, "A", stream)
        b = sample_noise(GRID, 5, "B", stream)
        assert abs(np.corrcoef(a.w_xx.ravel(), b.w_xx.ravel())[0, 1]) < 0.1
        assert not np.array_equal(a.w_mass.y, b.w_mass.y)

    def test_recorded_history(self):
        stream = NoiseStream(0, record=True)
        sample_noise(GRID, 2, "A", stream)
        sample_noise(GRID, 2, "B", stream)
        assert stream.history == [(2, "A"), (2, "B")]

    def test_combine_keeps_unit_variance(self):
        stream = NoiseStream(1)
        grid = Grid(300, 300, 1.0, 1.0)
        combined = sample_noise(grid, 0, "A", stream).combine(sample_noise(grid, 0, "B", stream))
        assert combined.w_yy.var() == pytest.approx(1.0, abs=0.02)

    def test_unknown_stage(self):
        with pytest.raises(ValueError) as excinfo:
            sample_noise(GRID, 0, "C", NoiseStream(0))
        assert str(excinfo.value) == "invalid value for which ('C'), should be A|B"


class TestStochasticMassFlux:
    def test_pure_component(self):
        state = uniform_state(GRID, 0.0)
        flux = stochastic_mass_flux(state, MODEL, 0.1, sample_noise(GRID, 0, "A", NoiseStream(0)))
        assert flux.max_abs() == 0.0

    def test_disabled(self):
        state = uniform_state(GRID, 0.5)
        flux = stochastic_mass_flux(state, MODEL, 0.1, sample_noise(GRID, 0, "A", NoiseStream(0)), enabled=False)
        assert flux.max_abs() == 0.0

    def test_walls_zeroed(self):
        grid = Grid(8, 8, 1.0, 1.0, bc_y="wall")
        flux = stochastic_mass_flux(uniform_state(grid, 0.5), MODEL, 0.1, sample_noise(grid, 0, "A", NoiseStream(0)))
        np.testing.assert_array_equal(flux.y[:, [0, -1]], 0.0)

    def test_ensemble_variance(self):
        grid = Grid(16, 16, 1.0, 1.0)
        state = uniform_state(grid, 0.5)
        stream = NoiseStream(11)
        samples = np.array(
            [stochastic_mass_flux(state, MODEL, 0.1, sample_noise(grid, step, "A", stream)).x for step in range(400)]
        )
        expected = mass_noise_variance(state, MODEL, 0.1).x
        np.testing.assert_allclose(expected, 2.0 * 1.0 * 1.0 * 0.375 / 0.1)
        assert samples.var(axis=0).mean() == pytest.approx(expected.mean(), rel=0.03)


class TestStochasticStressDivergence:
    @pytest.fixture
    def coefficients(self):
        return eval_coefficients(CellField.full(GRID, 0.5), MODEL)

    def test_zero_temperature(self, coefficients):
        noise = sample_noise(GRID, 0, "A", NoiseStream(0))
        result = stochastic_stress_divergence([coefficients], 0.1, GRID.dV, noise, 0.0)
        assert result.max_abs() == 0.0

    def test_periodic_sum_vanishes(self, coefficients):
        noise = sample_noise(GRID, 0, "A", NoiseStream(0))
        result = stochastic_stress_divergence([coefficients], 0.1, GRID.dV, noise, 1.0)
        assert result.x.sum() == pytest.approx(0.0, abs=1e-10)
        assert result.y.sum() == pytest.approx(0.0, abs=1e-10)

    def test_halfstep_scaling(self, coefficients):
        noise = sample_noise(GRID, 0, "A", NoiseStream(0))
        full = stochastic_stress_divergence([coefficients], 0.1, GRID.dV, noise, 1.0)
        half = stochastic_stress_divergence([coefficients], 0.1, GRID.dV, noise, 1.0, halfstep_scaling=True)
        np.testing.assert_allclose(half.x, np.sqrt(2.0) * full.x)

    def test_averaged_viscosity_amplitude(self, coefficients):
        noise = sample_noise(GRID, 0, "A", NoiseStream(0))
        single = stochastic_stress_divergence([coefficients], 0.1, GRID.dV, noise, 1.0)
        pair = stochastic_stress_divergence([coefficients, coefficients], 0.1, GRID.dV, noise, 1.0)
        np.testing.assert_allclose(pair.y, single.y)

    def test_wall_node_scaling_switch(self):
        grid = Grid(8, 8, 1.0, 1.0, bc_y="wall")
        coefficients = eval_coefficients(CellField.full(grid, 0.5), MODEL)
        noise = sample_noise(grid, 0, "A", NoiseStream(0))
        noise.w_xx[:] = 0.0
        noise.w_yy[:] = 0.0
        scaled = stochastic_stress_divergence([coefficients], 0.1, grid.dV, noise, 1.0)
        with wall_noise_sqrt2(False):
            plain = stochastic_stress_divergence([coefficients], 0.1, grid.dV, noise, 1.0)
        np.testing.assert_allclose(scaled.x[:, 1:-1], plain.x[:, 1:-1])
        assert not np.allclose(scaled.x[:, 0], plain.x[:, 0])
