#!/usr/bin/env python

"""Tests for `lowmix.integrators`."""

from contextlib import contextmanager

import numpy as np
import pytest

import lowmix
from lowmix.exceptions import CFLError, ConfigError, StabilityWarning
from lowmix.grid import CellField, FaceField, Grid, divergence
from lowmix.integrators import (
    CallbackObserver,
    CheckpointObserver,
    SnapshotObserver,
    StepParams,
    adaptive_dt,
    check_stability,
    inertial_step,
    overdamped_step,
    project_initial_velocity,
    run,
    stability_numbers,
)
from lowmix.mixture import ConstantModel, FluidState, IdealMixtureModel, LinearModel, MixtureModel, density_of_concentration
from lowmix.snapshots import read_checkpoint, read_snapshot
from lowmix.stochastic import NoiseStream

MODEL = MixtureModel(2.0 / 3.0, 2.0, LinearModel(1.0, 2.0), ConstantModel(1.0), IdealMixtureModel(1.0, 2.0), kT=1e-4)
GRID = Grid(16, 16, 1.0, 1.0, dz_thickness=1e6)
QUIET = StepParams(0.01, mass_noise=False, momentum_noise=False)


@contextmanager
def strict(enabled):
    previous = lowmix.config.strict
    lowmix.config.set_strict(enabled)
    yield
    lowmix.config.set_strict(previous)


def make_state(grid, concentration, momentum=None):
    c = np.broadcast_to(concentration, grid.shape).astype(float)
    rho = density_of_concentration(c, MODEL)
    return FluidState(
        CellField(grid, c * rho),
        CellField(grid, rho),
        FaceField.zeros(grid) if momentum is None else momentum,
        CellField.zeros(grid),
    )


def assert_same_state(a, b, rtol=1e-12):
    np.testing.assert_allclose(a.rho1.values, b.rho1.values, rtol=rtol)
    np.testing.assert_allclose(a.rho.values, b.rho.values, rtol=rtol)
    np.testing.assert_allclose(a.m.x, b.m.x, rtol=rtol, atol=1e-14)
    np.testing.assert_allclose(a.m.y, b.m.y, rtol=rtol, atol=1e-14)


class TestStepParams:
    def test_defaults(self):
        params = StepParams(0.1)
        assert params.scheme == "inertial"
        assert params.advection == "centered"
        assert not params.deterministic

    def test_deterministic(self):
        assert QUIET.deterministic

    def test_nonpositive_dt(self):
        with pytest.raises(ConfigError) as excinfo:
            StepParams(0.0)
        assert str(excinfo.value) == "invalid value for dt (0.0), should be > 0"

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            StepParams(0.1, scheme="explicit")


class TestStability:
    def test_numbers(self):
        state = make_state(GRID, 0.0, FaceField.full(GRID, 0.5, 0.0))
        numbers = stability_numbers(state, MODEL, 0.1)
        assert numbers["advective"] == pytest.approx(0.025)
        assert numbers["diffusive"] == pytest.approx(0.1)

    def test_diffusive_advisory(self):
        with pytest.warns(StabilityWarning, match="diffusive Courant number 0.3 at step 0 exceeds 1/4"):
            check_stability(make_state(GRID, 0.5), MODEL, StepParams(0.3))

    def test_strict_raises(self):
        with strict(True):
            with pytest.raises(CFLError) as excinfo:
                check_stability(make_state(GRID, 0.5), MODEL, StepParams(0.3))
        assert str(excinfo.value) == "diffusive Courant number 0.3 at step 0 exceeds 1/4"

    def test_adaptive_dt(self):
        state = make_state(GRID, 0.0, FaceField.full(GRID, 1.0, 0.0))
        assert adaptive_dt(state, 0.5, 10.0) == pytest.approx(1.0)
        assert adaptive_dt(state, 0.5, 0.01) == 0.01
        assert adaptive_dt(make_state(GRID, 0.5), 0.5, 3.0) == 3.0

    def test_adaptive_dt_target(self):
        with pytest.raises(ConfigError) as excinfo:
            adaptive_dt(make_state(GRID, 0.5), 1.5, 1.0)
        assert str(excinfo.value) == "invalid value for target_cfl (1.5), should be in (0, 1]"


class TestProjectInitialVelocity:
    def test_divergence_free(self):
        rng = np.random.default_rng(0)
        state = make_state(GRID, 0.5, FaceField(GRID, rng.standard_normal(GRID.x_face_shape), rng.standard_normal(GRID.y_face_shape)))
        before = np.abs(divergence(state.velocity).values).max()
        projected = project_initial_velocity(state, MODEL, QUIET, NoiseStream(0))
        assert np.abs(divergence(projected.velocity).values).max() < 1e-6 * before

    def test_walls(self):
        grid = Grid(16, 16, 1.0, 1.0, bc_y="wall")
        state = make_state(grid, 0.5, FaceField.full(grid, 0.0, 1.0))
        projected = project_initial_velocity(state, MODEL, QUIET, NoiseStream(0))
        np.testing.assert_array_equal(projected.m.y[:, [0, -1]], 0.0)


class TestSteps:
    @pytest.mark.parametrize("stepper", [inertial_step, overdamped_step])
    @pytest.mark.parametrize("bc_y", ["periodic", "wall"])
    def test_uniform_fixed_point(self, stepper, bc_y):
        grid = Grid(16, 16, 1.0, 1.0, bc_y=bc_y)
        state = make_state(grid, 0.3)
        new = stepper(state, MODEL, QUIET)
        assert_same_state(new, state)
        assert new.step == 1
        assert new.t == pytest.approx(0.01)

    @pytest.mark.parametrize("scheme", ["inertial", "overdamped"])
    def test_stochastic_step_conserves_mass(self, scheme):
        state = make_state(GRID, 0.5)
        new = (inertial_step if scheme == "inertial" else overdamped_step)(state, MODEL, StepParams(0.01, scheme), 0, NoiseStream(4))
        assert not np.allclose(new.rho1.values, state.rho1.values)
        assert new.rho1.total() == pytest.approx(state.rho1.total(), rel=1e-12)
        assert new.rho.total() == pytest.approx(state.rho.total(), rel=1e-12)

    @pytest.mark.parametrize("stepper", [inertial_step, overdamped_step])
    @pytest.mark.parametrize("bc_y", ["periodic", "wall"])
    def test_momentum_noise_only(self, stepper, bc_y):
        grid = Grid(16, 16, 1.0, 1.0, bc_y=bc_y)
        state = make_state(grid, 0.5)
        params = StepParams(0.01, mass_noise=False, momentum_noise=True)
        new = stepper(state, MODEL, params, 0, NoiseStream(3))
        np.testing.assert_allclose(new.rho1.values, state.rho1.values, rtol=1e-9)
        assert new.m.max_abs() > 0.0
        assert np.abs(divergence(new.velocity).values).max() < 1e-6 * new.velocity.max_abs() / grid.dx

    def test_same_key_same_step(self):
        state = make_state(GRID, 0.5)
        params = StepParams(0.01)
        assert_same_state(inertial_step(state, MODEL, params, 3, NoiseStream(8)), inertial_step(state, MODEL, params, 3, NoiseStream(8)))

    def test_recorded_draws(self):
        stream = NoiseStream(1, record=True)
        inertial_step(make_state(GRID, 0.5), MODEL, StepParams(0.01), 5, stream)
        assert stream.history == [(5, "A"), (6, "A")]


class TestRun:
    def test_zero_steps(self):
        state = make_state(GRID, 0.5)
        result = run(state, MODEL, QUIET, 0)
        assert result.state is state
        assert result.steps == 0

    def test_negative_steps(self):
        with pytest.raises(ValueError) as excinfo:
            run(make_state(GRID, 0.5), MODEL, QUIET, -1)
        assert str(excinfo.value) == "invalid value for n_steps (-1), should be >= 0"

    def test_adaptive_requires_deterministic(self):
        with pytest.raises(ConfigError) as excinfo:
            run(make_state(GRID, 0.5), MODEL, StepParams(0.01), 2, adaptive_cfl=0.5)
        assert str(excinfo.value) == "adaptive time stepping requires the stochastic fluxes to be disabled"

    def test_adaptive_history(self):
        result = run(make_state(GRID, 0.5), MODEL, QUIET, 3, adaptive_cfl=0.5)
        assert result.dt_history == [0.01, 0.01, 0.01]

    def test_summary(self):
        result = run(make_state(GRID, 0.5), MODEL, StepParams(0.01), 3, rng=NoiseStream(2))
        summary = result.summary()
        assert summary["steps"] == 3
        assert summary["time"] == pytest.approx(0.03)
        assert summary["mass_drift_rho1"] < 1e-12
        assert summary["mass_drift_rho"] < 1e-12
        assert summary["max_eos_residual"] <= 10 * StepParams(0.01).solver.tol
        assert summary["max_eos_residual_projected"] < 1e-13
        assert summary["max_gmres_iterations"] >= 1

    def test_eos_projection_every_step_by_default(self):
        result = run(make_state(GRID, 0.5), MODEL, StepParams(0.01), 2, rng=NoiseStream(2))
        assert result.max_eos_residual_projected < 1e-13

    def test_eos_projection_disabled(self):
        result = run(make_state(GRID, 0.5), MODEL, StepParams(0.01), 2, rng=NoiseStream(2), eos_projection_stride=0)
        assert result.max_eos_residual_projected is None
        assert "max_eos_residual_projected" not in result.summary()

    def test_observers(self, tmp_path):
        seen = []
        snapshots = SnapshotObserver(2, str(tmp_path), ("concentration", "velocity"))
        checkpoints = CheckpointObserver(2, str(tmp_path), seed=9)
        callback = CallbackObserver(1, lambda state: seen.append(state.step))
        run(make_state(GRID, 0.5), MODEL, QUIET, 4, [snapshots, checkpoints, callback])
        assert seen == [0, 1, 2, 3, 4]
        assert len(snapshots.written) == 6
        assert read_snapshot(snapshots.written[-1]).kind == "face"
        assert [read_checkpoint(path).state.step for path in checkpoints.written] == [2, 4]

    def test_unknown_snapshot_field(self):
        with pytest.raises(ConfigError) as excinfo:
            SnapshotObserver(1, ".", ("vorticity",))
        assert str(excinfo.value) == (
            "invalid value for snapshot fields (['vorticity']), should be concentration|rho1|rho|pressure|velocity"
        )

    def test_restart_continues_streams(self, tmp_path):
        params = StepParams(0.01)
        straight = run(make_state(GRID, 0.5), MODEL, params, 4, rng=NoiseStream(6))
        checkpoints = CheckpointObserver(2, str(tmp_path), seed=6)
        run(make_state(GRID, 0.5), MODEL, params, 2, [checkpoints], rng=NoiseStream(6))
        restored = read_checkpoint(checkpoints.written[-1])
        resumed = run(restored.state, MODEL, params, 2, rng=NoiseStream(restored.seed))
        assert resumed.state.step == 4
        assert_same_state(resumed.state, straight.state, rtol=1e-10)
