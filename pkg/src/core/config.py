"""
Configuration settings for the boson sampling toolkit
"""

from pydantic_settings import BaseSettings
import os

class Settings(BaseSettings):
    """Runtime settings loaded from environment variables"""

    # Enumeration and oracle limits
    BSBM_ENUM_CAP: int = 2 ** 20
    BSBM_RYSER_MAX_K: int = 20
    BSBM_FOCK_MAX_DIM: int = 100_000
    BSBM_MMD_MAX_BITS: int = 14

    # Numerics
    BSBM_UNITARITY_TOL: float = 1e-12

    # Parallelism
    BSBM_WORKERS: int = 1

    # Application Settings
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"  # Ignore extra environment variables


def get_settings() -> Settings:
    """Fresh settings snapshot, so environment changes apply to the next call"""
    return Settings()


def validate_environment():
    """Validate that numeric environment overrides are well formed"""
    positive_ints = ['BSBM_ENUM_CAP', 'BSBM_RYSER_MAX_K', 'BSBM_FOCK_MAX_DIM',
                     'BSBM_MMD_MAX_BITS', 'BSBM_WORKERS']
    invalid_vars = []

    for var in positive_ints:
        raw = os.getenv(var)
        if raw is None:
            continue
        try:
            if int(raw) < 1:
                invalid_vars.append(var)
        except ValueError:
            invalid_vars.append(var)

    raw_tol = os.getenv('BSBM_UNITARITY_TOL')
    if raw_tol is not None:
        try:
            if not float(raw_tol) > 0:
                invalid_vars.append('BSBM_UNITARITY_TOL')
        except ValueError:
            invalid_vars.append('BSBM_UNITARITY_TOL')

    if invalid_vars:
        raise ValueError(f"Invalid environment variables: {', '.join(invalid_vars)}")

    return True
