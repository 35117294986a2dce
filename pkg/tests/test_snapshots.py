#!/usr/bin/env python

"""Tests for `lowmix.snapshots`."""

import numpy as np
import pytest

from lowmix.exceptions import ConfigError, GeometryError
from lowmix.grid import CellField, FaceField, Grid, NodeField
from lowmix.mixture import FluidState
from lowmix.snapshots import SNAPSHOT_MAGIC, read_checkpoint, read_snapshot, write_checkpoint, write_snapshot

GRID = Grid(8, 6, 0.5, 0.25, 2.0, "periodic", "wall")


def random_state(seed=0):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(1.0, 2.0, GRID.shape)
    return FluidState(
        CellField(GRID, rho * rng.uniform(0.0, 1.0, GRID.shape)),
        CellField(GRID, rho),
        FaceField(GRID, rng.standard_normal(GRID.x_face_shape), rng.standard_normal(GRID.y_face_shape)),
        CellField(GRID, rng.standard_normal(GRID.shape)),
        1.25,
        17,
    )


class TestSnapshots:
    @pytest.fixture
    def result(self, tmp_path):
        state = random_state()
        path = write_snapshot(str(tmp_path / "out" / "c.lmx"), state.concentration, 1.25, "concentration", 17)
        return state, path, read_snapshot(path)

    def test_header(self, result):
        _, path, _ = result
        with open(path, "rb") as handle:
            assert handle.read(8) == SNAPSHOT_MAGIC

    def test_values(self, result):
        state, _, snapshot = result
        np.testing.assert_array_equal(snapshot.field.values, state.concentration.values)

    def test_metadata(self, result):
        _, _, snapshot = result
        assert snapshot.kind == "cell"
        assert snapshot.time == 1.25
        assert snapshot.name == "concentration"
        assert snapshot.step == 17
        assert snapshot.grid == GRID

    def test_face_and_node(self, tmp_path):
        state = random_state(1)
        face = read_snapshot(write_snapshot(str(tmp_path / "m.lmx"), state.m, 0.0)).field
        np.testing.assert_array_equal(face.x, state.m.x)
        np.testing.assert_array_equal(face.y, state.m.y)
        node = NodeField(GRID, np.arange(float(np.prod(GRID.node_shape))).reshape(GRID.node_shape))
        np.testing.assert_array_equal(read_snapshot(write_snapshot(str(tmp_path / "n.lmx"), node, 0.0)).field.values, node.values)

    def test_missing_sidecar_means_periodic(self, tmp_path):
        path = write_snapshot(str(tmp_path / "c.lmx"), CellField.full(GRID, 0.5), 0.0)
        (tmp_path / "c.lmx.meta").unlink()
        snapshot = read_snapshot(path)
        assert snapshot.grid.bc_y == "periodic"
        assert snapshot.name == ""

    def test_not_a_snapshot(self, tmp_path):
        path = tmp_path / "junk.lmx"
        path.write_bytes(b"\0" * 64)
        with pytest.raises(GeometryError) as excinfo:
            read_snapshot(str(path))
        assert str(excinfo.value) == f"{str(path)!r} is not a lowmix snapshot"

    def test_truncated(self, tmp_path):
        path = write_snapshot(str(tmp_path / "c.lmx"), CellField.full(GRID, 0.5), 0.0)
        with open(path, "rb") as handle:
            raw = handle.read()
        with open(path, "wb") as handle:
            handle.write(raw[:-8])
        with pytest.raises(GeometryError) as excinfo:
            read_snapshot(path)
        assert str(excinfo.value) == f"{path!r} holds 47 values, expected 48"

    def test_unsupported_item(self, tmp_path):
        with pytest.raises(TypeError) as excinfo:
            write_snapshot(str(tmp_path / "x.lmx"), np.zeros(3), 0.0)
        assert str(excinfo.value) == "cannot write a snapshot of ndarray"


class TestCheckpoints:
    @pytest.fixture
    def result(self, tmp_path):
        state = random_state(2)
        path = write_checkpoint(str(tmp_path / "ck.npz"), state, 20221017, 18, {"dt": 0.01})
        return state, read_checkpoint(path)

    def test_state(self, result):
        state, checkpoint = result
        restored = checkpoint.state
        assert restored.grid == GRID
        np.testing.assert_array_equal(restored.rho1.values, state.rho1.values)
        np.testing.assert_array_equal(restored.rho.values, state.rho.values)
        np.testing.assert_array_equal(restored.m.x, state.m.x)
        np.testing.assert_array_equal(restored.m.y, state.m.y)
        np.testing.assert_array_equal(restored.pi.values, state.pi.values)
        assert (restored.t, restored.step) == (1.25, 17)

    def test_stream_cursor(self, result):
        _, checkpoint = result
        assert checkpoint.seed == 20221017
        assert checkpoint.rng_cursor == 18
        assert checkpoint.extra == {"dt": 0.01}

    def test_version_checked(self, tmp_path):
        path = str(tmp_path / "old.npz")
        with open(path, "wb") as handle:
            np.savez(handle, format_version=np.array(7))
        with pytest.raises(ConfigError) as excinfo:
            read_checkpoint(path)
        assert str(excinfo.value) == "invalid value for checkpoint format_version (7), should be 1"
