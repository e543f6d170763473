"""
Settings for the graph KMS toolkit
Reads tolerances, iteration caps and truncation defaults from the environment (and .env)
"""

import os
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    tolerance: float = 1e-9
    pivot_tolerance: float = 1e-12
    max_iterations: int = 100_000
    log_level: str = "WARNING"
    n_jobs: int = 1
    max_k: int = 3
    max_r: int = 3
    verify_samples: int = 200
    random_seed: int = 0
    inner_cache_size: int = 1_000_000


def _read(name: str, default, cast):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        logger.warning(f"Ignoring invalid value {raw!r} for {name}, using {default!r}")
        return default


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Build settings from environment variables, after loading a .env file if present"""
    load_dotenv(env_file)
    return Settings(
        tolerance=_read("KMS_TOLERANCE", Settings.tolerance, float),
        pivot_tolerance=_read("KMS_PIVOT_TOLERANCE", Settings.pivot_tolerance, float),
        max_iterations=_read("KMS_MAX_ITERATIONS", Settings.max_iterations, int),
        log_level=_read("KMS_LOG_LEVEL", Settings.log_level, str).upper(),
        n_jobs=_read("KMS_N_JOBS", Settings.n_jobs, int),
        max_k=_read("KMS_MAX_K", Settings.max_k, int),
        max_r=_read("KMS_MAX_R", Settings.max_r, int),
        verify_samples=_read("KMS_VERIFY_SAMPLES", Settings.verify_samples, int),
        random_seed=_read("KMS_RANDOM_SEED", Settings.random_seed, int),
        inner_cache_size=_read("KMS_INNER_CACHE_SIZE", Settings.inner_cache_size, int),
    )


# Convenience function to get the process-wide settings
@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get the settings instance"""
    return load_settings()
