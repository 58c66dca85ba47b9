"""Suite-wide test configuration.

The incremental engine's self-audit re-sums its incumbent after every commit
and raises on drift; the whole suite runs with it enabled. Must be set
before the package is imported (the flag is read at import time).
"""

import os

os.environ.setdefault("FLOORMATCH_PARANOID", "1")
