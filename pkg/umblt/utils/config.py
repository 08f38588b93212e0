"""
Configuration Management for the UMBLT Reconstruction Toolkit
Handles environment variables and numerical defaults shared by every stage
"""

from pydantic_settings import BaseSettings
from typing import Optional
import os


class Settings(BaseSettings):
    """Application configuration settings"""

    # Application
    APP_NAME: str = "UMBLT Reconstruction Toolkit"
    APP_VERSION: str = "1.1.0"
    DEBUG: bool = False

    # Output
    UMBLT_OUT: str = "./umblt_out"

    # Linear solves
    SOLVER_TOL: float = 1e-10
    DIRECT_SOLVER_MAX_UNKNOWNS: int = 100_000
    ITERATIVE_MAX_ITER: int = 20_000

    # Spectral norm estimation (discrete UQ bound)
    POWER_ITER_MAX: int = 10_000
    NORM_EST_TOL: float = 1e-3
    BOUND_SLACK: float = 1e-2

    # Diagonal dominance tests are relative to the diagonal magnitude
    WCDD_RTOL: float = 1e-12

    # Uncertainty quantification
    PCE_MAX_ORDER: int = 10
    MAX_FAILURE_FRACTION: float = 0.10
    MAX_REDRAWS: int = 20

    # Coefficient defaults
    DEFAULT_GAMMA: float = 1.0
    DEFAULT_ELL: float = 2.0

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None
    LOG_ROTATION: str = "500 MB"
    LOG_RETENTION: str = "30 days"

    class Config:
        env_file = ".env"
        case_sensitive = True


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """
    Accessor for the process-wide settings

    Returns:
        Settings: Application configuration
    """
    return settings


def setup_directories(out_dir: Optional[str] = None):
    """Create output and log directories if they don't exist"""
    directories = [out_dir or settings.UMBLT_OUT]
    if settings.LOG_FILE:
        directories.append(os.path.dirname(settings.LOG_FILE) or ".")

    for directory in directories:
        os.makedirs(directory, exist_ok=True)


if __name__ == "__main__":
    # Test configuration
    setup_directories()
    print("Configuration loaded successfully")
    print(f"App: {settings.APP_NAME} v{settings.APP_VERSION}")
    print(f"Output: {settings.UMBLT_OUT} | Solver tol: {settings.SOLVER_TOL:g}")
