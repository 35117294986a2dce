#!/usr/bin/env python

"""Tests for `lowmix.cli`."""

import os

import numpy as np
import pytest

import lowmix
from lowmix import cli
from lowmix.exceptions import GeometryError, NonFiniteError, SolverError
from lowmix.grid import CellField, FaceField, Grid
from lowmix.snapshots import write_snapshot

SMOKE = """
[scenario]
name = smoke

[grid]
nx = 8
ny = 8
lx = 8.0
ly = 8.0
dz = 1000000.0

[integrator]
dt = 0.1
steps = 2
"""

CAVITY = """
[scenario]
preset = cavity-2d
name = tiny-cavity

[grid]
nx = 8
ny = 8

[initial]
profile = uniform(0.5)

[integrator]
dt = 0.01
steps = 2
"""


@pytest.fixture(autouse=True)
def quiet_runtime():
    yield
    lowmix.config.set_verbose(False)


def write_config(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def write_series(directory, count, grid, seed=0):
    rng = np.random.default_rng(seed)
    for n in range(count):
        write_snapshot(f"{directory}/c_{n:04d}.lmx", CellField(grid, rng.uniform(0.4, 0.6, grid.shape)), 0.1 * n)


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.build_parser().parse_args(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip() == f"lowmix {lowmix.__version__}"

    def test_command_required(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.build_parser().parse_args([])
        assert excinfo.value.code == 2

    def test_verbose_and_quiet_exclusive(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["-v", "-q", "simulate", "x.ini"])

    def test_levels(self):
        args = cli.build_parser().parse_args(["converge", "x.ini", "--levels", "8,16,32"])
        assert args.levels == [8, 16, 32]
        assert args.variables == "u,v,c"

    def test_bad_levels(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["converge", "x.ini", "--levels", "8,sixteen"])

    def test_simulate_defaults(self):
        args = cli.build_parser().parse_args(["simulate", "x.ini"])
        assert (args.desk, args.seed, args.output) == (False, None, None)


class TestSimulate:
    def test_success(self, tmp_path, capsys):
        path = write_config(tmp_path, SMOKE)
        output = str(tmp_path / "out")
        assert cli.main(["-q", "simulate", path, "--seed", "3", "--output", output]) == cli.EXIT_OK
        assert capsys.readouterr().out.strip() == f"smoke: 2 steps, summary in {output}/summary.json"
        assert os.path.exists(f"{output}/final_concentration.lmx")

    def test_invalid_config(self, tmp_path):
        path = write_config(tmp_path, "[grid]\nnx = 2\n")
        assert cli.main(["-q", "simulate", path]) == cli.EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert cli.main(["-q", "simulate", str(tmp_path / "absent.ini")]) == cli.EXIT_CONFIG

    @pytest.mark.parametrize(
        "error,code",
        [
            (SolverError("GMRES did not converge: stalled", [1.0, 0.5]), cli.EXIT_SOLVER),
            (NonFiniteError("stokes"), cli.EXIT_NONFINITE),
            (GeometryError("bad grid"), cli.EXIT_SOLVER),
        ],
    )
    def test_failure_codes(self, tmp_path, monkeypatch, error, code):
        def fail(config, output_dir=None):
            raise error

        monkeypatch.setattr(cli, "_run_scenario", fail)
        assert cli.main(["-q", "simulate", write_config(tmp_path, SMOKE)]) == code

    def test_verbose_flag(self, tmp_path):
        cli.main(["-v", "simulate", write_config(tmp_path, SMOKE), "--output", str(tmp_path / "out")])
        assert lowmix.config.verbose


class TestAnalyze:
    def test_tables(self, tmp_path, capsys):
        write_series(tmp_path, 40, Grid(16, 8, 0.5, 0.5, bc_y="wall"))
        output = str(tmp_path / "tables")
        code = cli.main(["-q", "analyze", f"{tmp_path}/c_*.lmx", "--lags", "9", "--oscillatory-modes", "0", "--output", output])
        assert code == cli.EXIT_OK
        assert sorted(os.listdir(output)) == ["correlation_t3.9_w3.9.csv", "fits_t3.9_w3.9.csv", "spectrum_t3.9_w3.9.csv"]
        assert len(capsys.readouterr().out.split()) == 3

    def test_window(self, tmp_path):
        write_series(tmp_path, 20, Grid(16, 8, 0.5, 0.5))
        output = str(tmp_path / "tables")
        assert cli.main(["-q", "analyze", f"{tmp_path}/c_*.lmx", "--window", "1.0", "--output", output]) == cli.EXIT_OK
        assert os.listdir(output) == ["spectrum_t1_w1.csv"]

    def test_too_few_snapshots(self, tmp_path):
        write_series(tmp_path, 1, Grid(8, 8, 1.0, 1.0))
        assert cli.main(["-q", "analyze", f"{tmp_path}/c_*.lmx"]) == cli.EXIT_CONFIG

    def test_face_snapshots_rejected(self, tmp_path):
        grid = Grid(8, 8, 1.0, 1.0)
        for n in range(3):
            write_snapshot(f"{tmp_path}/v_{n}.lmx", FaceField.zeros(grid), float(n))
        assert cli.main(["-q", "analyze", f"{tmp_path}/v_*.lmx", "--output", str(tmp_path)]) == cli.EXIT_CONFIG


class TestConverge:
    def test_table(self, tmp_path, capsys):
        path = write_config(tmp_path, CAVITY)
        output = str(tmp_path / "conv")
        assert cli.main(["-q", "converge", path, "--levels", "8,16,32", "--output", output]) == cli.EXIT_OK
        assert os.path.exists(f"{output}/convergence.csv")
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split() == ["8-16", "order", "16-32", "order"]
        assert [line.split()[0] for line in lines[1:]] == ["u", "v", "c"]
        with open(f"{output}/convergence.csv", encoding="utf-8") as handle:
            assert handle.readline().strip()

    def test_too_few_levels(self, tmp_path):
        path = write_config(tmp_path, CAVITY)
        with pytest.raises(ValueError) as excinfo:
            cli.main(["-q", "converge", path, "--levels", "8,16", "--output", str(tmp_path)])
        assert str(excinfo.value) == "invalid number of levels (2), should be >= 3"
