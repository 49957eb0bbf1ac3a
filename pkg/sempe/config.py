from functools import lru_cache
from pathlib import Path
from typing import Union

from dotenv import dotenv_values
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SEMPE_",
        extra="ignore",
    )

    register_count: int = Field(default=16, ge=8, le=64)
    jbtable_capacity: int = Field(default=30, ge=1, le=255)
    base_cpi: int = Field(default=1, ge=1)
    drain_penalty: int = Field(default=14, ge=0)
    spm_bandwidth: int = Field(default=64, ge=1)
    cache_enabled: bool = False
    cache_size: int = 32 * 1024
    cache_ways: int = 2
    cache_line: int = 64
    cache_hit_latency: int = 1
    cache_miss_penalty: int = 20
    step_limit: int = 20_000_000
    scan_cap: int = 256
    scan_workers: int = Field(default=1, ge=1)
    bench_workers: int = Field(default=2, ge=1)
    collapse_nesting: bool = True
    privatize_all: bool = False
    mask_indices: bool = True
    log_level: str = "WARNING"


@lru_cache
def get_settings() -> Settings:
    return Settings()


def clear_settings_cache() -> None:
    get_settings.cache_clear()


def load_config(path: Union[str, Path]) -> Settings:
    """Read a flat key=value machine configuration file.

    Keys are the lowercase Settings field names; missing keys keep their
    defaults.
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ValueError(f"config file not found: {config_path}")

    raw = dotenv_values(config_path)
    unknown = sorted(key for key in raw if key.lower() not in Settings.model_fields)
    if unknown:
        raise ValueError(f"unknown config keys in {config_path}: {', '.join(unknown)}")

    values = {key.lower(): value for key, value in raw.items() if value is not None}
    return Settings(**values)
