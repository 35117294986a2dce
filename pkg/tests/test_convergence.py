#!/usr/bin/env python

"""Tests for `lowmix.convergence`."""

import csv
import math

import numpy as np
import pytest
from attrs import define

from lowmix.convergence import (
    PECLET_BDS_THRESHOLD,
    ConvergenceTable,
    average_down,
    convergence_orders,
    convergence_study,
    dimensionless_report,
    error_norms,
    self_convergence,
    write_convergence_csv,
)
from lowmix.exceptions import GeometryError
from lowmix.grid import CellField, FaceField, Grid
from lowmix.mixture import WATER_GLYCEROL_CHI, WATER_GLYCEROL_ETA, FluidState, MixtureModel
from lowmix.scenarios import parse_config


def grid_at(n):
    return Grid(n, n, 1.0 / n, 1.0 / n)


def planted_state(n, offset=1.0):
    """Linear fields plus an error of ``offset h^2``"""
    grid = grid_at(n)
    error = offset * grid.dx**2
    x, y = grid.cell_centers()
    c = 0.3 + 0.2 * x + 0.1 * y + error
    ux, uy = grid.x_face_centers()
    vx, vy = grid.y_face_centers()
    momentum = FaceField(grid, 1.0 + 0.5 * uy + error, 0.25 * vx + error)
    return FluidState(CellField(grid, c), CellField.full(grid, 1.0), momentum, CellField.zeros(grid))


@define
class PlantedConfig:
    """Scenario stand-in whose final state carries a known discretisation error"""

    n: int = 8
    offset: float = 1.0

    def at_resolution(self, n):
        return PlantedConfig(n, self.offset)

    def final_state(self):
        return planted_state(self.n, self.offset)


class TestAverageDown:
    def test_linear_cells_exact(self):
        fine, coarse = grid_at(16), grid_at(8)
        x, y = fine.cell_centers()
        cx, cy = coarse.cell_centers()
        restricted = average_down(CellField(fine, 2.0 * x - y), coarse)
        np.testing.assert_allclose(restricted.values, 2.0 * cx - cy, atol=1e-14)

    def test_linear_faces_exact(self):
        fine, coarse = grid_at(16), grid_at(8)
        _, fy = fine.x_face_centers()
        fx, _ = fine.y_face_centers()
        restricted = average_down(FaceField(fine, fy, fx), coarse)
        _, cy = coarse.x_face_centers()
        cx, _ = coarse.y_face_centers()
        np.testing.assert_allclose(restricted.x, cy, atol=1e-14)
        np.testing.assert_allclose(restricted.y, cx, atol=1e-14)

    def test_not_a_refinement(self):
        with pytest.raises(GeometryError) as excinfo:
            average_down(CellField.zeros(grid_at(12)), grid_at(8))
        assert str(excinfo.value) == "grid 12x12 is not a factor-2 refinement of 8x8"


class TestNorms:
    def test_norms(self):
        grid = grid_at(8)
        diff = np.zeros(grid.shape)
        diff[0, 0] = 4.0
        norms = error_norms(CellField(grid, diff), CellField.zeros(grid))
        assert norms == {"Linf": 4.0, "L1": 4.0 / 64, "L2": pytest.approx(math.sqrt(16.0 / 64))}

    def test_different_grids(self):
        with pytest.raises(GeometryError) as excinfo:
            error_norms(CellField.zeros(grid_at(8)), CellField.zeros(grid_at(16)))
        assert str(excinfo.value) == "cannot compare fields on different grids"

    def test_orders(self):
        orders = convergence_orders([1.0, 0.25, 0.0625, 0.0])
        assert orders[:2] == [2.0, 2.0]
        assert math.isnan(orders[2])


class TestConvergenceStudy:
    @pytest.fixture
    def result(self):
        return convergence_study(PlantedConfig(), [8, 16, 32, 64], ("u", "v", "c", "rho"))

    @pytest.mark.parametrize("variable", ["u", "v", "c"])
    @pytest.mark.parametrize("norm", ["Linf", "L1", "L2"])
    def test_planted_order(self, result, variable, norm):
        for order in result.orders[variable][norm]:
            assert order == pytest.approx(2.0, abs=1e-3)

    def test_uniform_state_has_no_error(self, result):
        assert result.errors["rho"]["Linf"] == [0.0, 0.0, 0.0]
        assert all(math.isnan(order) for order in result.orders["rho"]["Linf"])

    def test_errors(self, result):
        assert result.levels == [8, 16, 32, 64]
        assert result.errors["c"]["Linf"][0] == pytest.approx(1.0 / 64 - 1.0 / 256)

    def test_format(self, result):
        lines = result.format("Linf").splitlines()
        assert lines[0].split() == ["8-16", "order", "16-32", "order", "32-64", "order"]
        assert lines[1].split()[0] == "u"
        assert lines[1].split()[2] == "2.00"

    def test_csv(self, result, tmp_path):
        with open(write_convergence_csv(str(tmp_path / "conv.csv"), result), encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 4 * 3 * 3
        first = rows[0]
        assert (first["variable"], first["norm"], first["coarse"], first["fine"]) == ("u", "Linf", "8", "16")
        assert first["order"] == "nan"
        assert float(rows[1]["order"]) == pytest.approx(2.0, abs=1e-3)

    def test_too_few_levels(self):
        with pytest.raises(ValueError) as excinfo:
            convergence_study(PlantedConfig(), [8, 16])
        assert str(excinfo.value) == "invalid number of levels (2), should be >= 3"

    def test_not_factor_two(self):
        with pytest.raises(GeometryError) as excinfo:
            convergence_study(PlantedConfig(), [8, 16, 48])
        assert str(excinfo.value) == "levels 16 and 48 are not a factor-2 refinement"

    def test_unknown_variable(self):
        with pytest.raises(ValueError) as excinfo:
            convergence_study(PlantedConfig(), [8, 16, 32], ("p",))
        assert str(excinfo.value) == "invalid value for variable ('p'), should be u|v|c|rho"

    def test_mismatched_levels(self):
        with pytest.raises(ValueError) as excinfo:
            self_convergence([{"c": CellField.zeros(grid_at(8))}], [8, 16])
        assert str(excinfo.value) == "one set of fields is needed per level"

    def test_table_add(self):
        table = ConvergenceTable([8, 16, 32])
        table.add("c", "L2", [0.4, 0.1])
        assert table.orders == {"c": {"L2": [2.0]}}


class TestDimensionlessReport:
    def test_water_glycerol_at_rest(self):
        model = MixtureModel(1.29, 1.0, WATER_GLYCEROL_ETA, WATER_GLYCEROL_CHI, c_range=(0.0, 0.6))
        grid = Grid(8, 8, 1.0, 1.0)
        state = FluidState(CellField.zeros(grid), CellField.full(grid, 1.0), FaceField.zeros(grid), CellField.zeros(grid))
        report = dimensionless_report(state, model)
        assert report.schmidt == pytest.approx(1.009e-2 / 1.024e-5)
        assert report.schmidt == pytest.approx(985, rel=1e-3)
        assert report.reynolds_cell == 0.0
        assert report.peclet_cell == 0.0
        assert not report.bds_advised
        assert "courant_advective" not in report.to_dict()

    @pytest.mark.parametrize("speed,advised", [(1.5, False), (3.0, True)])
    def test_peclet_threshold(self, speed, advised):
        model = MixtureModel(1.0, 1.0)
        grid = Grid(8, 8, 1.0, 1.0)
        state = FluidState(
            CellField.full(grid, 0.5), CellField.full(grid, 1.0), FaceField.full(grid, speed, 0.0), CellField.zeros(grid)
        )
        report = dimensionless_report(state, model, dt=0.1)
        assert report.peclet_cell == pytest.approx(speed)
        assert report.reynolds_cell == pytest.approx(speed)
        assert report.schmidt == 1.0
        assert report.bds_advised is advised
        assert (report.peclet_cell > PECLET_BDS_THRESHOLD) is advised
        assert report.to_dict()["courant_advective"] == pytest.approx(0.1 * speed)


def cavity(scheme="inertial", chi=None, **integrator):
    lines = ["[scenario]", "preset = cavity-2d", "[integrator]", f"scheme = {scheme}"]
    lines.extend(f"{key} = {value}" for key, value in integrator.items())
    if chi is not None:
        lines.extend(["[mixture]", f"chi = {chi}"])
    return parse_config("\n".join(lines))


@pytest.mark.slow
class TestCavityConvergence:
    @pytest.mark.parametrize(
        "scheme, chi, integrator",
        [
            ("inertial", None, {}),
            ("inertial", None, {"advection": "bds"}),
            ("inertial", None, {"advection": "bds", "bds_reconstruction": "quadratic"}),
            ("inertial", "constant(0.0)", {"advection": "bds"}),
            ("overdamped", None, {}),
            ("overdamped", None, {"advection": "bds"}),
        ],
        ids=["centered", "bds-bilinear", "bds-quadratic", "bds-no-diffusion", "overdamped-centered", "overdamped-bds"],
    )
    def test_second_order(self, scheme, chi, integrator):
        table = convergence_study(cavity(scheme, chi, **integrator), [64, 128, 256])
        for variable in ("u", "v", "c"):
            orders = table.orders[variable]["Linf"]
            assert all(1.7 <= order <= 2.3 for order in orders), (variable, orders)

        if scheme == "inertial" and not integrator:
            assert table.errors["u"]["Linf"][0] == pytest.approx(1.93e-3, rel=0.2)
            assert table.errors["v"]["Linf"][0] == pytest.approx(8.69e-4, rel=0.2)
