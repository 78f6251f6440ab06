from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide defaults, overridable through UNIPROT_* variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="UNIPROT_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    default_lambda: float = Field(0.01, gt=0)
    default_tol: float = Field(1e-6, gt=0)
    emd_max_iter: int = Field(1_000_000, ge=1)
    threads: int = Field(1, ge=1)
    output_dir: str = "runs"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
