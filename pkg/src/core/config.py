import logging as _stdlib_logging
import os

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="SIEGELFLOW_"
    )

    LOG_DIR: str = Field(default="logs", description="Directory for logs")
    LOG_LEVEL: str = Field(default="INFO", description="Root logger level")
    CACHE_DIR: str = Field(default=".cache", description="Default directory of the density cache")
    DEFAULT_BUDGET: int = Field(
        default=50_000_000, ge=1_000_000, description="Enumeration node cap for counting kernels"
    )
    THREAD_COUNT: int = Field(default=5, ge=1, description="Worker threads for enumeration kernels")
    DEFAULT_P: int = Field(default=11, description="Prime used when --p is not given")

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_level(cls, v):
        if isinstance(v, str):
            v = v.strip().upper()
            # getLevelNamesMapping() is 3.11+; on older Pythons use the same underlying mapping
            level_names = getattr(
                _stdlib_logging, "getLevelNamesMapping", lambda: dict(_stdlib_logging._nameToLevel)
            )()
            if v not in level_names:
                raise ValueError(f"unknown log level {v!r}")
        return v


settings = Settings()

# Ensure log and cache directories exist
os.makedirs(settings.LOG_DIR, exist_ok=True)
os.makedirs(settings.CACHE_DIR, exist_ok=True)
