"""Runtime configuration read from the environment (and an optional .env file)."""
import os

from dotenv import load_dotenv

load_dotenv()

TOOL_NAME = 'spectral-kcluster'
TOOL_VERSION = '1.0.0'
FORMAT_VERSIONS = {
    'edge-list': 1,
    'partition-csv': 1,
    'report': 1,
    'manifest': 1,
}

LOG_LEVEL = os.environ.get('SPECTRAL_LOG_LEVEL', 'INFO').upper()

# Seed fallback when --seed is not given; the generator is numpy's PCG64.
DEFAULT_SEED = int(os.environ.get('SPECTRAL_SEED', 0))

DENSE_CUTOFF = int(os.environ.get('SPECTRAL_DENSE_CUTOFF', 300))
SOLVER_TOL = float(os.environ.get('SPECTRAL_TOL', 1e-10))
BRUTE_LIMIT = int(os.environ.get('SPECTRAL_BRUTE_LIMIT', 20))

MAX_K = int(os.environ.get('SPECTRAL_MAX_K', 50))
MAX_N = int(os.environ.get('SPECTRAL_MAX_N', 1_000_000))


def env_seed(default: int = DEFAULT_SEED) -> int:
    """Re-read SPECTRAL_SEED so a value exported after import still applies."""
    raw = os.environ.get('SPECTRAL_SEED')
    if raw is None or raw == '':
        return default
    return int(raw)
