# config.py
import os
from dotenv import load_dotenv

load_dotenv()

PACKAGE_NAME = "sparsekern"
PACKAGE_VERSION = "0.3.0"
MODEL_FORMAT_VERSION = 1

# --- Feature sampling ---
FEATURE_BLOCK_SIZE = 1024          # features per RNG substream
PMF_TOLERANCE = 1e-12

# --- Kernel oracles ---
COMBINATORIAL_GUARD = 10**6        # max C(l, d) enumerated by the additive oracles
QUADRATURE_NODES = 48              # Gauss-Hermite nodes per axis
QUADRATURE_BIAS_NODES = 24         # Gauss-Legendre nodes over the bias interval
GRAM_CHUNK_PAIRS = 65536

# --- Readout ---
DEFAULT_K_FOLDS = 5
HUBER_DELTA = 1.35
HUBER_MAX_ITER = 500
HUBER_TOL = 1e-8
TRIM_Z = 3.0
TEST_FRACTION = 0.25
POLY_LAMBDA_GRID = (1e-4, 1e2, 7)

NOISE_FLOOR = 0.0025

STUDIES_CONFIG = {
    "convergence": {
        "l": 8, "nonlinearity": "cosine", "degree": "regular:8",
        "weights": "gaussian-iso:1.0", "bias": "uniform:-3.141592653589793:3.141592653589793",
        "m_grid": (256, 1024, 4096, 16384), "n_probe_pairs": 200,
    },
    "polytest": {
        "l": 16, "d_grid": (1, 3, 10, 16), "n_grid": (100, 200, 400, 800),
        "m": 300, "n_test": 10_000, "alpha": 0.05, "noise_std": 0.05,
        "weight_variance": "literal", "n_calibration": 100_000,
    },
    "stability": {
        "n": 800, "l": 10, "p": 0.03, "sigma": 6.0, "mode": "per-coordinate",
        "test_fraction": TEST_FRACTION,
    },
    "eigen": {
        "n": 800, "l": 10, "mode": "per-coordinate",
        "configs": ((0.03, 6.0), (0.2, 6.0), (0.5, 6.0), (0.03, 2.0), (0.03, 10.0)),
    },
}

# --- Environment ---
SPARSEKERN_THREADS = os.getenv("SPARSEKERN_THREADS")
SPARSEKERN_QUIET = os.getenv("SPARSEKERN_QUIET", "").lower() in ("1", "true", "yes")


def resolve_workers(threads: int | None = None) -> int:
    """0 or None means one worker per CPU."""
    if threads is None:
        threads = int(SPARSEKERN_THREADS) if SPARSEKERN_THREADS else 0
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)
