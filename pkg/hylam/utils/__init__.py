"""Configuration, system helpers and result export.

This module re-exports the helpers most callers need.
"""

from .config import ConfigManager, RunConfig, emit_config, parse_config
from .system import CrashHandler, PathManager, SystemDoctor

__all__ = ["ConfigManager", "RunConfig", "emit_config", "parse_config", "SystemDoctor", "PathManager",
           "CrashHandler"]
