"""
Base model classes for ExtraPoint pydantic models.
"""

from pydantic import BaseModel, ConfigDict


class FrozenModel(BaseModel):
    """Immutable value model; unknown fields are rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class ReportModel(BaseModel):
    """Result of an empirical check or a condition verdict."""

    model_config = ConfigDict(frozen=True)
