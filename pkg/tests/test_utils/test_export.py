"""Tests for result files."""

import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.discretization import Mesh
from hylam.core.engine import EXTRA_COLUMNS, TRACE_COLUMNS, Problem, run_evolution
from hylam.core.loading import LoadProgram, TimePartition
from hylam.utils.export import (
    ExportError,
    read_snapshots,
    read_trace,
    sha256_file,
    write_csv,
    write_manifest,
    write_snapshots,
    write_trace,
)
from hylam.utils.system import PathManager


@pytest.fixture
def trace_and_problem(reference_layers, parabolic_law):
    problem = Problem(Mesh(1.0, 4), reference_layers, parabolic_law, LoadProgram.linear_ramp(0.1),
                      TimePartition.uniform(1.0, 3), snapshot_steps=(0, 3))
    return run_evolution(problem, log_callback=lambda msg: None), problem


class TestTraceFiles:
    """Test trace.csv writing and reloading."""

    def test_header_and_reload(self, temp_dir, trace_and_problem):
        """Test that every recorded value survives a reload exactly."""
        trace, _ = trace_and_problem
        path = write_trace(os.path.join(temp_dir, "trace.csv"), trace)

        with open(path) as f:
            assert f.readline().strip().split(",") == TRACE_COLUMNS + EXTRA_COLUMNS
        table = read_trace(path)

        assert len(table) == 4
        np.testing.assert_array_equal(table["W"], trace.column("W"))
        np.testing.assert_array_equal(table["converged"], [1.0, 1.0, 1.0, 1.0])

    def test_runs_are_byte_identical(self, temp_dir, trace_and_problem):
        """Test that two identical runs write identical traces."""
        trace, problem = trace_and_problem
        again = run_evolution(problem, log_callback=lambda msg: None)

        first = write_trace(os.path.join(temp_dir, "a.csv"), trace)
        second = write_trace(os.path.join(temp_dir, "b.csv"), again)

        assert sha256_file(first) == sha256_file(second)

    def test_missing_trace(self, temp_dir):
        """Test that a missing file raises ExportError."""
        with pytest.raises(ExportError):
            read_trace(os.path.join(temp_dir, "absent.csv"))

    def test_missing_column(self, temp_dir):
        """Test that required ledger columns are enforced."""
        path = write_csv(os.path.join(temp_dir, "short.csv"), ["k", "t"], [{"k": 0, "t": 0.0}])

        with pytest.raises(ExportError) as exc_info:
            read_trace(path)

        assert "missing columns" in str(exc_info.value)

    def test_non_numeric_cell(self, temp_dir, trace_and_problem):
        """Test that garbage cells are reported with their location."""
        trace, _ = trace_and_problem
        rows = trace.rows()
        rows[1]["E"] = "abc"
        path = write_csv(os.path.join(temp_dir, "bad.csv"), TRACE_COLUMNS, rows)

        with pytest.raises(ExportError) as exc_info:
            read_trace(path)

        assert ":3:E" in str(exc_info.value)


class TestSnapshots:
    """Test nodal snapshot files."""

    def test_snapshot_reload(self, temp_dir, trace_and_problem):
        """Test that reloaded snapshots reproduce the nodal fields."""
        trace, problem = trace_and_problem
        write_snapshots(temp_dir, trace, problem.layers)

        snapshots = read_snapshots(temp_dir)

        assert sorted(snapshots) == [0, 3]
        for k, state in snapshots.items():
            np.testing.assert_array_equal(state.u1, trace.snapshots[k].u1)
            np.testing.assert_array_equal(state.gamma, trace.snapshots[k].gamma)
            assert state.t == trace.snapshots[k].t
        assert os.path.exists(os.path.join(temp_dir, "snapshots", "step_00003", "elements.csv"))

    def test_snapshot_directories_follow_path_manager(self, temp_dir, trace_and_problem):
        """Test that each snapshot lands in PathManager.snapshot_dir and is read back from there."""
        trace, problem = trace_and_problem

        written = write_snapshots(temp_dir, trace, problem.layers)

        assert [str(p) for p in written] == [PathManager.snapshot_dir(temp_dir, k) for k in (0, 3)]
        assert sorted(os.listdir(PathManager.snapshot_root(temp_dir))) == ["step_00000", "step_00003"]
        assert sorted(read_snapshots(temp_dir)) == [0, 3]

    def test_no_snapshots(self, temp_dir):
        """Test that a directory without snapshots gives an empty dict."""
        assert read_snapshots(temp_dir) == {}


class TestManifest:
    """Test manifest.json."""

    def test_manifest_hashes(self, temp_dir, trace_and_problem):
        """Test relative paths, file hashes and the absence of timestamps."""
        trace, _ = trace_and_problem
        path = write_trace(os.path.join(temp_dir, "trace.csv"), trace)

        manifest_path = write_manifest(temp_dir, "{}\n", [path], 5, "1.0.0", {"numpy": "x"}, {"n_steps": 3})
        with open(manifest_path) as f:
            manifest = json.load(f)

        assert manifest["files"] == {"trace.csv": sha256_file(path)}
        assert manifest["seed"] == 5
        assert manifest["n_steps"] == 3
        assert set(manifest) == {"version", "seed", "config_sha256", "environment", "files", "n_steps"}
