"""Centralized configuration with env var overrides.

All tunable limits live here. Override any via environment variables or a
.env file at the project root.
"""

import logging
import os
from pathlib import Path

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parent.parent

load_dotenv(PROJECT_ROOT / ".env")

log = logging.getLogger(__name__)

_clamped: list[str] = []


def _bounded_int(name: str, default: int, low: int, high: int | None = None) -> int:
    value = int(os.environ.get(name, default))
    bounded = max(value, low) if high is None else min(max(value, low), high)
    if bounded != value:
        _clamped.append(f"{name}={value} -> {bounded}")
    return bounded


# ── Logging ──
LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO").upper()

# ── Parallelism ──
CSTREE_THREADS = _bounded_int("CSTREE_THREADS", os.cpu_count() or 1, 1)

# ── Search limits ──
CSTREE_PERMUTATION_LIMIT = _bounded_int("CSTREE_PERMUTATION_LIMIT", 8, 1, 10)
CSTREE_TARGET_BUDGET = _bounded_int("CSTREE_TARGET_BUDGET", 2**15, 1)
CSTREE_CLOSURE_LIMIT = _bounded_int("CSTREE_CLOSURE_LIMIT", 200_000, 1)

# ── Randomness ──
CSTREE_SEED = int(os.environ.get("CSTREE_SEED", 0))
CSTREE_DIRICHLET_ALPHA = float(os.environ.get("CSTREE_DIRICHLET_ALPHA", 1.0))
if CSTREE_DIRICHLET_ALPHA <= 0:
    _clamped.append(f"CSTREE_DIRICHLET_ALPHA={CSTREE_DIRICHLET_ALPHA} -> 1.0")
    CSTREE_DIRICHLET_ALPHA = 1.0

# ── Simulation ──
CSTREE_TRAIN_SAMPLES = _bounded_int("CSTREE_TRAIN_SAMPLES", 10_000, 1)
CSTREE_VALID_SAMPLES = _bounded_int("CSTREE_VALID_SAMPLES", 10, 1)
CSTREE_BOOTSTRAP_REPLICATES = _bounded_int("CSTREE_BOOTSTRAP_REPLICATES", 1000, 1)

# Warn at import time about out-of-range settings
if _clamped:
    log.warning(f"Configuration values clamped: {', '.join(_clamped)}")
