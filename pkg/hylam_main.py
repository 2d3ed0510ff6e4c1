#!/usr/bin/env python3
"""
hylam - Main entry point.

Wraps the command-line interface with the crash handler.
"""

import sys

from hylam.cli import main as cli_main
from hylam.utils.system import CrashHandler


def _out_dir(argv):
    if "--out" in argv and argv.index("--out") + 1 < len(argv):
        return argv[argv.index("--out") + 1]
    return None


def main():
    """Main application entry point."""
    try:
        sys.exit(cli_main())
    except SystemExit:
        raise
    except Exception as e:
        CrashHandler.handle(e, _out_dir(sys.argv))
        sys.exit(1)


if __name__ == "__main__":
    main()
