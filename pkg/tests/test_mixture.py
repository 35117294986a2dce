#!/usr/bin/env python

"""Tests for `lowmix.mixture`."""

from contextlib import contextmanager

import numpy as np
import pytest

import lowmix
from lowmix.exceptions import ConfigError, DomainError, NonFiniteError
from lowmix.grid import CellField, FaceField, Grid
from lowmix.mixture import (
    WATER_GLYCEROL_CHI,
    WATER_GLYCEROL_ETA,
    ConstantModel,
    FluidState,
    IdealMixtureModel,
    LinearModel,
    MixtureModel,
    RationalModel,
    beta,
    clamp_concentration,
    density_of_concentration,
    describe_coefficient_model,
    eval_coefficients,
    face_coefficient,
    max_eos_residual,
    parse_coefficient_model,
    project_pair_to_eos,
    project_state_to_eos,
)

EQUILIBRIUM = MixtureModel(2.0 / 3.0, 2.0, LinearModel(1.0, 10.0), ConstantModel(1.0), IdealMixtureModel(1.0, 2.0))
WATER_GLYCEROL = MixtureModel(1.29, 1.0, WATER_GLYCEROL_ETA, WATER_GLYCEROL_CHI, ConstantModel(0.0), c_range=(0.0, 0.6))


@contextmanager
def clamp_eps(eps):
    previous = lowmix.config.clamp_eps
    lowmix.config.set_clamp_eps(eps)
    yield
    lowmix.config.set_clamp_eps(previous)


def state_from_concentration(grid, c, model):
    rho = density_of_concentration(c, model)
    return FluidState(CellField(grid, c * rho), CellField(grid, rho), FaceField.zeros(grid), CellField.zeros(grid))


class TestDensity:
    def test_equilibrium_mixture(self):
        assert density_of_concentration(0.5, EQUILIBRIUM) == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("c, expected", [(0.0, 2.0), (1.0, 2.0 / 3.0)])
    def test_pure_components(self, c, expected):
        assert density_of_concentration(c, EQUILIBRIUM) == pytest.approx(expected, rel=1e-15)

    def test_water_glycerol(self):
        assert density_of_concentration(0.39, WATER_GLYCEROL) == pytest.approx(1.0960, abs=1e-4)

    def test_out_of_range(self):
        with pytest.raises(DomainError) as excinfo:
            density_of_concentration(1.1, EQUILIBRIUM)
        assert str(excinfo.value) == "concentration outside [0, 1] beyond clamp window 1e-12"

    def test_clamp_window(self):
        with clamp_eps(1e-3):
            assert clamp_concentration(np.array([-5e-4]))[0] == 0.0
        with pytest.raises(ConfigError) as excinfo:
            lowmix.config.set_clamp_eps(-1.0)
        assert str(excinfo.value) == "invalid value for clamp_eps (-1.0), should be >= 0"


class TestBeta:
    def test_incompressible_limit(self):
        model = MixtureModel(1.0, 1.0)
        assert beta(0.3, model) == 0.0

    def test_equilibrium_value(self):
        assert beta(0.5, EQUILIBRIUM) == pytest.approx(-1.0, rel=1e-14)

    def test_beta_over_rho_constant(self):
        ratios = [beta(c, EQUILIBRIUM) / density_of_concentration(c, EQUILIBRIUM) for c in (0.0, 0.5, 1.0)]
        np.testing.assert_allclose(ratios, EQUILIBRIUM.beta_over_rho, rtol=1e-14)

    @pytest.mark.parametrize("c", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_derivative(self, c):
        h = 1e-6
        slope = (density_of_concentration(c + h, EQUILIBRIUM) - density_of_concentration(c - h, EQUILIBRIUM)) / (2 * h)
        expected = density_of_concentration(c, EQUILIBRIUM) * beta(c, EQUILIBRIUM)
        assert slope == pytest.approx(expected, rel=1e-6)


class TestCoefficientModels:
    def test_water_glycerol_pure_water(self):
        assert WATER_GLYCEROL_ETA(0.0) == pytest.approx(1.009e-2)
        assert WATER_GLYCEROL_CHI(0.0) == pytest.approx(1.024e-5)

    def test_water_glycerol_chi(self):
        assert WATER_GLYCEROL_CHI(0.39) == pytest.approx(5.031e-6, rel=1e-3)

    def test_ideal_mixture(self):
        assert IdealMixtureModel(1.0, 2.0)(0.5) == pytest.approx(0.375)

    def test_rational_pole(self):
        with pytest.raises(DomainError) as excinfo:
            WATER_GLYCEROL_ETA(np.array([0.7]))
        assert str(excinfo.value) == "rational coefficient fit has a nonpositive denominator"

    def test_pole_inside_default_range(self):
        with pytest.raises(DomainError):
            MixtureModel(1.29, 1.0, WATER_GLYCEROL_ETA, WATER_GLYCEROL_CHI)

    def test_nonpositive_viscosity(self):
        with pytest.raises(DomainError) as excinfo:
            MixtureModel(1.0, 1.0, LinearModel(1.0, -1.0))
        assert str(excinfo.value) == "viscosity model must be positive on c_range"

    @pytest.mark.parametrize(
        "text, kind, expected",
        [
            ("constant(2.5)", "chi", ConstantModel(2.5)),
            ("linear(0.1, 1.0)", "eta", LinearModel(0.1, 1.0)),
            ("rational(1, 2, 3, 4)", "eta", RationalModel(1.0, 2.0, 3.0, 4.0)),
            ("ideal(1, 2)", "mu", IdealMixtureModel(1.0, 2.0)),
            ("water-glycerol", "eta", WATER_GLYCEROL_ETA),
            ("ideal-gas-like", "mu", IdealMixtureModel()),
        ],
    )
    def test_parse(self, text, kind, expected):
        model = parse_coefficient_model(text, kind)
        assert model == expected
        assert parse_coefficient_model(describe_coefficient_model(model), kind) == model

    def test_parse_unknown(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_coefficient_model("cubic(1)", "eta")
        assert str(excinfo.value) == "invalid value for eta model ('cubic(1)')"

    def test_parse_bad_arguments(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_coefficient_model("linear(1)", "chi")
        assert str(excinfo.value) == "invalid arguments for chi model ('linear(1)')"


class TestEvalCoefficients:
    @pytest.fixture
    def result(self):
        grid = Grid(8, 8, 1.0, 1.0)
        c = CellField(grid, np.linspace(0.0, 1.0, 64).reshape(8, 8))
        return c, eval_coefficients(c, EQUILIBRIUM)

    def test_pointwise(self, result):
        c, coefficients = result
        np.testing.assert_allclose(coefficients.eta_cell.values, 1.0 + 9.0 * c.values)
        np.testing.assert_allclose(coefficients.chi.values, 1.0)
        np.testing.assert_allclose(coefficients.mu_inv_kT.values, IdealMixtureModel()(c.values))

    def test_node_viscosity_positive(self, result):
        _, coefficients = result
        assert coefficients.eta_node.values.shape == (8, 8)
        assert np.all(coefficients.eta_node.values >= 1.0)

    def test_non_finite(self):
        grid = Grid(4, 4, 1.0, 1.0)
        model = MixtureModel(1.0, 2.0, RationalModel(1.0, 0.0, 1.0, 0.0, scale=np.inf))
        with pytest.raises(NonFiniteError) as excinfo:
            eval_coefficients(CellField.full(grid, 0.5), model)
        assert excinfo.value.stage == "coefficients"

    def test_face_coefficient_vanishes_for_pure_component(self):
        grid = Grid(4, 4, 1.0, 1.0)
        result = face_coefficient(CellField.zeros(grid), EQUILIBRIUM)
        assert result.max_abs() == 0.0


class TestProjection:
    def test_on_eos_unchanged(self):
        grid = Grid(4, 4, 1.0, 1.0)
        state = state_from_concentration(grid, np.full(grid.shape, 0.3), EQUILIBRIUM)
        projected = project_state_to_eos(state, EQUILIBRIUM)
        np.testing.assert_allclose(projected.rho1.values, state.rho1.values, rtol=1e-15)
        np.testing.assert_allclose(projected.rho.values, state.rho.values, rtol=1e-15)

    def test_pure_densities(self):
        rho1, rho2 = project_pair_to_eos(2.0 / 3.0, 2.0, 2.0 / 3.0, 2.0)
        assert rho1 / (2.0 / 3.0) + rho2 / 2.0 == pytest.approx(1.0, abs=1e-15)

    def test_origin_is_nearest_point(self):
        rho1_bar, rho2_bar = 2.0, 1.0
        rho1, rho2 = project_pair_to_eos(0.0, 0.0, rho1_bar, rho2_bar)
        candidates = np.linspace(0.0, rho1_bar, 200001)
        distances = candidates**2 + (rho2_bar * (1.0 - candidates / rho1_bar)) ** 2
        assert rho1**2 + rho2**2 == pytest.approx(distances.min(), rel=1e-9)

    def test_random_perturbations(self):
        grid = Grid(8, 8, 1.0, 1.0)
        state = state_from_concentration(grid, np.full(grid.shape, 0.5), EQUILIBRIUM)
        rng = np.random.default_rng(1)
        state.rho1 = CellField(grid, state.rho1.values + 1e-6 * rng.standard_normal(grid.shape))
        assert max_eos_residual(state, EQUILIBRIUM) > 1e-8
        assert max_eos_residual(project_state_to_eos(state, EQUILIBRIUM), EQUILIBRIUM) <= 1e-14
