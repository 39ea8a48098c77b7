"""
Main entry point for running entbench as a module with python -m entbench
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
