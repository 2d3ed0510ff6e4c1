"""Tests for system utilities."""

import json
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from hylam.core.errors import ConfigError, OracleError
from hylam.utils.system import CrashHandler, PathManager, SystemDoctor


class TestSystemDoctor:
    """Test environment diagnostics."""

    def test_run_diagnostics(self):
        """Test that every report field is filled."""
        report = SystemDoctor().run_diagnostics()

        assert set(report) == {"python", "numpy", "scipy", "platform"}
        assert all(isinstance(value, str) and value for value in report.values())

    def test_environment_omits_platform(self):
        """Test the manifest subset."""
        env = SystemDoctor().environment()

        assert "platform" not in env
        assert set(env) == {"python", "numpy", "scipy"}


class TestPathManager:
    """Test output layout helpers."""

    def test_ensure_dir(self, temp_dir):
        """Test nested directory creation."""
        path = os.path.join(temp_dir, "a", "b")

        assert PathManager.ensure_dir(path) == path
        assert os.path.isdir(path)

    def test_layout(self):
        """Test snapshot and sweep point paths."""
        assert PathManager.snapshot_dir("out", 7) == os.path.join("out", "snapshots", "step_00007")
        assert PathManager.sweep_point_dir("out", 3) == os.path.join("out", "points", "3")
        assert PathManager.snapshot_root("out") == os.path.join("out", "snapshots")


class TestCrashHandler:
    """Test failure reports."""

    def test_config_error_details(self, temp_dir):
        """Test that validation messages land in error.json."""
        path = CrashHandler.handle(ConfigError(["a: bad", "b: worse"]), temp_dir)

        with open(path) as f:
            report = json.load(f)
        assert report == {"error": "ConfigError", "message": "a: bad; b: worse", "details": ["a: bad", "b: worse"]}
        assert not os.path.exists(os.path.join(temp_dir, "traceback.txt"))

    def test_domain_error(self, temp_dir):
        """Test a domain error without details."""
        CrashHandler.handle(OracleError("too many"), temp_dir)

        with open(os.path.join(temp_dir, "error.json")) as f:
            assert json.load(f)["error"] == "OracleError"

    def test_unexpected_error_writes_traceback(self, temp_dir, capsys):
        """Test that non-domain failures also write traceback.txt."""
        try:
            raise RuntimeError("boom")
        except RuntimeError as exc:
            CrashHandler.handle(exc, temp_dir)

        with open(os.path.join(temp_dir, "traceback.txt")) as f:
            assert "RuntimeError: boom" in f.read()
        assert "[FATAL]" in capsys.readouterr().out
