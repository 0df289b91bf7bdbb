"""
Configuration settings for the Young-Taylor expansion toolkit
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Output and logging
OUTPUT_DIR_ENV = "YOUNG_TAYLOR_OUTPUT_DIR"
OUTPUT_DIR = os.getenv(OUTPUT_DIR_ENV, "./results")
LOG_LEVEL = os.getenv("YOUNG_TAYLOR_LOG_LEVEL", "INFO")

# Worker cap (overridden by --threads)
THREADS = int(os.getenv("YOUNG_TAYLOR_THREADS", "1"))

# Picard reference solver
PICARD_MAX_ITER = 50
PICARD_TOL_SCALE = 1e-10
PICARD_SPLIT_DEPTH = 6

# Expansion budgets
MAX_TABLE_WORDS = 500_000
MAX_JET_DEPTH = 12
PERMUTATION_CAP = 6

# Lie series
LIE_TRUST_RADIUS = 5.0

# Tail sums
TAIL_MAX_TERMS = 1_000_000
TAIL_RELATIVE_CUTOFF = 1e-300

# Growth fit
GROWTH_TOLERANCE = 0.02
GAMMA_GRID = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

# Monte Carlo
MC_MIN_REPLICATES = 100
MC_DEFAULT_REPLICATES = 10_000

# CSV dialect
CSV_DIGITS = 17

_thread_limit = max(1, THREADS)


def set_thread_limit(n: int) -> None:
    """Set the global worker cap used by parallel loops."""
    global _thread_limit
    if n < 1:
        raise ValueError(f"thread limit must be >= 1, got {n}")
    _thread_limit = n


def thread_limit() -> int:
    return _thread_limit
