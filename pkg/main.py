# main.py

import os
import sys

# Add the project root to the path so `src` imports work from a checkout
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
