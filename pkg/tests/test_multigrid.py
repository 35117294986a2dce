#!/usr/bin/env python

"""Tests for `lowmix.multigrid`."""

import numpy as np
import pytest

from lowmix.grid import BCSpec, CellField, FaceField, Grid, NodeField, WallSpec, average_cell_to_node
from lowmix.multigrid import (
    HelmholtzHierarchy,
    PoissonHierarchy,
    grid_hierarchy,
    multigrid_helmholtz,
    multigrid_poisson,
)


def smooth_beta(grid):
    x, y = grid.x_face_centers()
    bx = 1.0 + 0.5 * np.sin(2 * np.pi * x / grid.lengths[0])
    x, y = grid.y_face_centers()
    by = 1.0 + 0.5 * np.cos(2 * np.pi * y / grid.lengths[1])
    return FaceField(grid, bx, by)


class TestGridHierarchy:
    def test_levels(self):
        levels = grid_hierarchy(Grid(64, 32, 1.0, 1.0))
        assert [(g.nx, g.ny) for g in levels] == [(64, 32), (32, 16), (16, 8), (8, 4)]

    def test_odd_grid_single_level(self):
        assert len(grid_hierarchy(Grid(9, 8, 1.0, 1.0))) == 1

    def test_cached(self):
        grid = Grid(16, 16, 1.0, 1.0)
        assert grid_hierarchy(grid) is grid_hierarchy(Grid(16, 16, 1.0, 1.0))


class TestMultigridPoisson:
    @pytest.fixture(params=["periodic", "wall"])
    def result(self, request):
        grid = Grid(32, 32, 1.0 / 32, 1.0 / 32, bc_x=request.param, bc_y=request.param)
        beta = smooth_beta(grid)
        hierarchy = PoissonHierarchy(beta)
        exact = np.random.default_rng(0).standard_normal(grid.shape)
        exact -= exact.mean()
        rhs = CellField(grid, hierarchy.apply(exact))
        return exact, multigrid_poisson(beta, rhs, cycles=25), hierarchy, rhs

    def test_converges(self, result):
        exact, solution, _, _ = result
        np.testing.assert_allclose(solution.values, exact, atol=1e-6 * np.abs(exact).max())

    def test_mean_free(self, result):
        _, solution, _, _ = result
        assert solution.values.mean() == pytest.approx(0.0, abs=1e-12)

    def test_cycle_reduces_residual(self, result):
        _, _, hierarchy, rhs = result
        p = np.zeros(rhs.grid.shape)
        before = np.abs(hierarchy.residual(p, rhs.values)).max()
        for _ in range(3):
            p = hierarchy.vcycle(p, rhs.values)
        assert np.abs(hierarchy.residual(p, rhs.values)).max() < 0.1 * before

    def test_rhs_mean_removed(self):
        grid = Grid(16, 16, 1.0, 1.0)
        solution = multigrid_poisson(FaceField.full(grid, 1.0, 1.0), CellField.full(grid, 3.0), cycles=2)
        np.testing.assert_allclose(solution.values, 0.0, atol=1e-12)


class TestMultigridHelmholtz:
    @pytest.fixture(params=[(1.0, "periodic"), (1.0, "wall"), (0.0, "wall")])
    def problem(self, request):
        alpha_value, bc = request.param
        grid = Grid(32, 32, 1.0 / 32, 1.0 / 32, bc_x=bc, bc_y=bc)
        rng = np.random.default_rng(1)
        eta_cell = CellField(grid, rng.uniform(1.0, 2.0, grid.shape))
        eta_node = average_cell_to_node(eta_cell)
        alpha = FaceField.full(grid, alpha_value, alpha_value).scaled(1.0 / grid.dx**2)
        hierarchy = HelmholtzHierarchy(alpha, eta_cell, eta_node)
        exact = FaceField(grid, rng.standard_normal(grid.x_face_shape), rng.standard_normal(grid.y_face_shape))
        return grid, alpha, eta_cell, eta_node, hierarchy, exact

    def test_residual_reduction(self, problem):
        grid, alpha, eta_cell, eta_node, hierarchy, exact = problem
        rhs = hierarchy.apply(exact)
        solution = multigrid_helmholtz(alpha, eta_cell, eta_node, rhs, cycles=20)
        assert (rhs - hierarchy.apply(solution)).max_abs() < 1e-3 * rhs.max_abs()
        assert solution.grid == grid

    def test_wall_rows_identity(self):
        grid = Grid(16, 16, 1.0, 1.0, bc_x="wall", bc_y="wall")
        eta = CellField.full(grid, 1.0)
        hierarchy = HelmholtzHierarchy(FaceField.full(grid, 1.0, 1.0), eta, NodeField(grid, np.ones(grid.node_shape)))
        velocity = FaceField.full(grid, 2.0, -3.0)
        result = hierarchy.apply(velocity)
        np.testing.assert_allclose(result.x[[0, -1], :], 2.0)
        np.testing.assert_allclose(result.y[:, [0, -1]], -3.0)

    def test_moving_walls_ignored(self):
        grid = Grid(16, 16, 1.0, 1.0, bc_y="wall")
        eta = CellField.full(grid, 1.0)
        node = NodeField(grid, np.ones(grid.node_shape))
        alpha = FaceField.full(grid, 1.0, 1.0)
        moving = HelmholtzHierarchy(alpha, eta, node, BCSpec(y_hi=WallSpec(lambda x, t: 1.0 + x)))
        still = HelmholtzHierarchy(alpha, eta, node)
        velocity = FaceField.full(grid, 0.5, 0.0)
        np.testing.assert_allclose(moving.apply(velocity).x, still.apply(velocity).x)
