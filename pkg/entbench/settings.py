from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]


class Settings(BaseSettings):
    """Defines the environment-driven configuration."""

    # ENTBENCH_LOG
    LOG: str = "INFO"
    THREADS: int = 1
    PROGRESS: bool = True

    # This tells pydantic to load variables from a .env file
    model_config = SettingsConfigDict(
        env_prefix="ENTBENCH_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    @field_validator("LOG")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"Unknown log level {value!r}; expected one of {LOG_LEVELS}")
        return level

    @field_validator("THREADS")
    @classmethod
    def _positive_threads(cls, value: int) -> int:
        if value < 1:
            raise ValueError("THREADS must be at least 1")
        return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Single, reusable settings instance"""
    return Settings()
