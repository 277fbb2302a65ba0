"""Core module for ExtraPoint."""

from extrapoint.core.config import Settings, get_settings
from extrapoint.core.exceptions import (
    ConfigError,
    ExtraPointError,
    NumericalError,
    OracleError,
    ParameterValidationError,
)

__all__ = [
    "ConfigError",
    "ExtraPointError",
    "NumericalError",
    "OracleError",
    "ParameterValidationError",
    "Settings",
    "get_settings",
]
