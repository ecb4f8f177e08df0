"""
Hotspot MOSUM - Main Entry Point
Joint mean/variance change points and stress hotspots from the command line
"""

import sys

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
