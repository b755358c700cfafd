"""Process-level settings."""
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings loaded from ``IMSVD_*`` environment variables or a ``.env`` file."""

    model_config = SettingsConfigDict(
        env_prefix="IMSVD_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Worker count for embedding extraction; training itself is sequential
    threads: int = Field(default=1, ge=1, description="Upper bound on worker threads")

    # Default --out
    output_dir: Path = Path("./runs")

    log_level: str = "INFO"

    # Chunk size when encoding whole datasets for evaluation
    eval_batch_size: int = Field(default=512, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Cached settings; ``get_settings.cache_clear()`` re-reads the environment."""
    return Settings()
