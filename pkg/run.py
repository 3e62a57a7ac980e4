#!/usr/bin/env python3
"""Entry point for the gridob verification toolkit."""

import sys
from gridob.cli import main

if __name__ == "__main__":
    sys.exit(main())
