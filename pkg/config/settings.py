"""
Configuration Settings for STRADDLE_BENCH
"""

import os
from typing import List, Optional
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(
        env_prefix="STRADDLE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # App Configuration
    app_name: str = "STRADDLE_BENCH"
    app_version: str = "1.0.0"
    log_level: str = Field(default="INFO")

    # Execution
    workers: int = Field(default=1, ge=1)
    output_dir: str = Field(default="results")

    # Dataset locations used by the built-in presets
    mnist_images_path: Optional[str] = Field(default=None)
    mnist_test_images_path: Optional[str] = Field(default=None)
    swarm_csv_path: Optional[str] = Field(default=None)
    swarm_drop_columns: List[str] = Field(default=["Swarm_Behaviour"])

    # Initialiser defaults
    random_normal_stddev: float = Field(default=0.05, gt=0)

    # Recorded in experiment metadata; not configurable
    prng_algorithm: str = "PCG64"

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()

    def get_output_path(self, *parts: str) -> str:
        """Get full output path below the configured output directory"""
        return os.path.join(self.output_dir, *parts)
