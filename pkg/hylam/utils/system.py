"""System utilities: environment diagnostics, output paths and crash reports."""

import json
import os
import platform
import traceback

import numpy as np
import scipy

from ..core.errors import ConfigError, HylamError


class SystemDoctor:
    """Collects the numerical environment a run depends on."""

    def __init__(self):
        """Initialize system doctor."""
        self.report = {
            "python": None,
            "numpy": None,
            "scipy": None,
            "platform": None,
        }

    def run_diagnostics(self):
        """
        Run environment diagnostics.

        Returns:
            dict: versions of python, numpy and scipy plus the platform string
        """
        self.report["python"] = platform.python_version()
        self.report["numpy"] = np.__version__
        self.report["scipy"] = scipy.__version__
        self.report["platform"] = platform.platform(terse=True)
        return self.report

    def environment(self):
        """Diagnostics without the platform string, for manifests."""
        report = dict(self.run_diagnostics())
        report.pop("platform")
        return report


class PathManager:
    """Handles output directory layout."""

    @staticmethod
    def ensure_dir(path):
        """
        Create a directory (and parents) if needed.

        Returns:
            str: the directory path
        """
        os.makedirs(path, exist_ok=True)
        return path

    @staticmethod
    def snapshot_root(out_dir):
        return os.path.join(out_dir, "snapshots")

    @staticmethod
    def snapshot_dir(out_dir, k):
        return os.path.join(PathManager.snapshot_root(out_dir), f"step_{int(k):05d}")

    @staticmethod
    def sweep_point_dir(out_dir, index):
        return os.path.join(out_dir, "points", str(int(index)))


class CrashHandler:
    """Writes error.json (and a traceback for unexpected failures) into the output directory."""

    @staticmethod
    def describe(exception):
        """Machine-readable description of a failure."""
        details = []
        if isinstance(exception, ConfigError):
            details = list(exception.errors)
        return {
            "error": type(exception).__name__,
            "message": str(exception),
            "details": details,
        }

    @staticmethod
    def handle(exception, out_dir=None):
        """
        Record a failure.

        Args:
            exception (Exception): The exception that ended the run
            out_dir (str, optional): Output directory; the current directory if omitted

        Returns:
            str: path of error.json, or None if it could not be written
        """
        out_dir = out_dir or os.getcwd()
        filename = os.path.join(out_dir, "error.json")
        try:
            PathManager.ensure_dir(out_dir)
            with open(filename, "w", encoding="utf-8") as f:
                json.dump(CrashHandler.describe(exception), f, indent=4, sort_keys=True)
            if not isinstance(exception, HylamError):
                with open(os.path.join(out_dir, "traceback.txt"), "w", encoding="utf-8") as f:
                    f.write("".join(traceback.format_exception(type(exception), exception,
                                                               exception.__traceback__)))
                print(f"[FATAL] Unexpected failure. Details saved to {filename}")
            return filename
        except OSError:
            print("[FATAL] Could not write error report.")
            traceback.print_exc()
            return None
