import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_float(key: str, default: float) -> float:
    value = os.getenv(key)
    return float(value) if value not in (None, "") else default


def _env_int(key: str, default: int) -> int:
    value = os.getenv(key)
    return int(value) if value not in (None, "") else default


# Configuration class to hold all settings
class Config:
    # Logging
    LOG_LEVEL = os.getenv("FLUIDTAIL_LOG_LEVEL", "INFO")
    LOGGER_NAME = "FluidTail"

    # Spectral oracle
    DEFAULT_TRUNCATION = _env_int("FLUIDTAIL_TRUNCATION", 400)
    MIN_TRUNCATION_MARGIN = 10

    # Monte Carlo
    DEFAULT_HORIZON = _env_float("FLUIDTAIL_HORIZON", 5.0e6)
    DEFAULT_WARMUP = _env_float("FLUIDTAIL_WARMUP", 1.0e3)
    DEFAULT_SEED = _env_int("FLUIDTAIL_SEED", 20240611)
    DEFAULT_STRIDE = _env_float("FLUIDTAIL_STRIDE", 1.0)
    SIM_REPLICATIONS = _env_int("FLUIDTAIL_REPLICATIONS", 4)
    SIM_BLOCKS = _env_int("FLUIDTAIL_BLOCKS", 50)
    SIM_CHUNK = _env_int("FLUIDTAIL_CHUNK", 1 << 20)
    SIM_TRACKED_PHASES = _env_int("FLUIDTAIL_TRACKED_PHASES", 64)
    SIM_GRID_POINTS = _env_int("FLUIDTAIL_GRID_POINTS", 200)
    # survival grid runs to SIM_GRID_SPAN/alpha1
    SIM_GRID_SPAN = _env_float("FLUIDTAIL_GRID_SPAN", 40.0)
    SIM_MAX_WORKERS = _env_int("FLUIDTAIL_MAX_WORKERS", 4)
    MIN_TAIL_SAMPLES = _env_int("FLUIDTAIL_MIN_TAIL_SAMPLES", 10_000)
    BOOTSTRAP_RESAMPLES = _env_int("FLUIDTAIL_BOOTSTRAP", 200)

    # Polynomial arithmetic
    EXTENDED_PRECISION_C = _env_int("FLUIDTAIL_EXTENDED_PRECISION_C", 10)

    # Numerical tolerances
    ZERO_TOL = _env_float("FLUIDTAIL_ZERO_TOL", 1e-8)
    SPURIOUS_TOL = _env_float("FLUIDTAIL_SPURIOUS_TOL", 1e-4)
    BRANCH_TIE_TOL = _env_float("FLUIDTAIL_BRANCH_TIE_TOL", 1e-9)
    CUT_TOL = _env_float("FLUIDTAIL_CUT_TOL", 1e-12)
    DOUBLE_ROOT_TOL = _env_float("FLUIDTAIL_DOUBLE_ROOT_TOL", 1e-14)
    NEGATIVE_MASS_TOL = _env_float("FLUIDTAIL_NEGATIVE_MASS_TOL", 1e-10)
    MAX_MULTIPLICITY = 4

    # Comparison tolerances (relative)
    RATE_TOL_POLE = _env_float("FLUIDTAIL_RATE_TOL_POLE", 1e-3)
    RATE_TOL_BRANCH = _env_float("FLUIDTAIL_RATE_TOL_BRANCH", 2e-2)
    RATE_TOL_MC = _env_float("FLUIDTAIL_RATE_TOL_MC", 0.10)
    PREFACTOR_TOL = _env_float("FLUIDTAIL_PREFACTOR_TOL", 0.02)

    # HTTP service
    API_HOST = os.getenv("FLUIDTAIL_API_HOST", "0.0.0.0")
    API_PORT = _env_int("FLUIDTAIL_API_PORT", 8000)
