import os
from typing import Optional, Tuple

from pydantic import BaseModel


class Settings(BaseModel):
    """Numerical and runtime configuration"""

    # Project Info
    PROJECT_NAME: str = "Rabi Estimation Toolkit"
    VERSION: str = "1.0.0"

    # Linear algebra tolerances
    HERMITIAN_TOL: float = 1e-10  # relative to max-abs norm of H
    NORM_TOL: float = 1e-12
    EIGEN_TOL: float = 1e-10
    POVM_TOL: float = 1e-10
    PROBABILITY_SUM_TOL: float = 1e-9
    ORTHONORMAL_TOL: float = 1e-10
    IDENTITY_TOL: float = 1e-12
    DERIVATIVE_NORM_TOL: float = 1e-9

    # Estimation thresholds
    SINGULAR_TIME_TOL: float = 1e-9  # on |sin(Ω₊t/2)|
    SINGULAR_CONDITION: float = 1e12
    ZERO_PROBABILITY: float = 1e-12
    LIKELIHOOD_FLOOR: float = 1e-12
    FD_RELATIVE_STEP: float = 1e-5

    # Adaptive protocol defaults
    DEFAULT_SHOTS_PER_ROUND: int = 30
    DEFAULT_SEGMENTS: int = 1000
    DEFAULT_GRID_POINTS: int = 81
    DEFAULT_BOX: Tuple[float, float] = (-2.0, 2.0)
    TIE_RELATIVE_TOL: float = 1e-9
    REFINE_XTOL: float = 1e-6
    REFINE_MAX_ITER: int = 400
    ALIAS_LOG_RATIO: float = 6.0  # rival modes closer than this in log-likelihood get a discriminating round
    TRUST_RADIUS_FRACTION: float = 0.8  # of the alias period 2π/t, around the initial guess

    # Randomness
    DEFAULT_SEED: int = 0
    SEED_ENV_VAR: str = "RABIEST_SEED"

    # Cache Configuration
    CACHE_MAX_SIZE: int = 4096  # control unitaries kept in the LRU cache

    # Output
    CSV_FLOAT_FORMAT: str = "%.17g"
    PARQUET_COMPRESSION: str = "snappy"

    # Logging
    LOG_LEVEL: str = os.getenv("RABIEST_LOG_LEVEL", "WARNING")
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Monitoring
    ENABLE_METRICS: bool = True

    def env_seed(self) -> Optional[int]:
        """
        Read the default-seed override from the environment

        Returns:
            Seed from RABIEST_SEED, or None when unset
        """
        raw = os.getenv(self.SEED_ENV_VAR)
        if raw is None or not raw.strip():
            return None
        try:
            return int(raw.strip(), 0)
        except ValueError:
            from app.core.errors import ConfigError

            raise ConfigError(
                f"{self.SEED_ENV_VAR}={raw!r} is not an integer",
                resolution=f"Set {self.SEED_ENV_VAR} to an integer in [0, 2**64)",
            )

    def resolve_seed(self, flag: Optional[int] = None, configured: Optional[int] = None) -> int:
        """Flag wins, then a config-file seed, then the environment, then the default"""
        for candidate in (flag, configured, self.env_seed()):
            if candidate is not None:
                return candidate
        return self.DEFAULT_SEED


# Create global settings instance
settings = Settings()
