#!/usr/bin/env python
"""Command-line entry point of the flux regularity lab."""
import sys


def main():
    """Run a lab command."""
    try:
        from fluxreg.cli import run
    except ImportError as exc:
        raise ImportError(
            "Couldn't import the lab dependencies. Are numpy, scipy, pandas and "
            "reportlab installed in the active environment? See requirements.txt."
        ) from exc
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
