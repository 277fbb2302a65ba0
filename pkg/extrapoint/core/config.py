"""
ExtraPoint - Process Configuration
Pydantic Settings for solver and harness defaults
"""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="EXTRAPOINT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: Literal["debug", "info", "warning", "error"] = Field(
        default="info", description="Minimum log level"
    )
    log_json: bool = Field(default=False, description="Render log events as JSON lines")

    @field_validator("log_level", mode="before")
    @classmethod
    def lowercase_level(cls, value: object) -> object:
        return value.lower() if isinstance(value, str) else value

    # Execution
    threads: int = Field(
        default=1, ge=1, description="Worker threads used for replications"
    )
    output_dir: Path = Field(
        default=Path("out"), description="Default directory for CSV/SVG output"
    )

    # Reference solves
    reference_tolerance: float = Field(
        default=1e-10, gt=0, description="Projected-residual tolerance for z*"
    )
    reference_max_iters: int = Field(
        default=1_000_000, ge=1, description="Iteration cap for reference solves"
    )

    # Empirical contract checks
    contract_standard_errors: float = Field(
        default=3.0, gt=0, description="Standard errors of headroom in oracle checks"
    )
    monotonicity_probes: int = Field(
        default=1000, ge=1, description="Random pairs probed by monotonicity checks"
    )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
