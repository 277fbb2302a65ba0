"""
Serialized matrix-game instances.

A generated game is written as JSON; floats are emitted with shortest
round-trip repr so a reloaded payoff matrix is bit-identical.
"""

from enum import Enum

from pydantic import Field, model_validator

from extrapoint.models.base import FrozenModel


class NoiseDistribution(str, Enum):
    """Payoff noise families."""

    NORMAL = "normal"
    LOGNORMAL = "lognormal"


class GameInstance(FrozenModel):
    """On-disk form of a MatrixGameProblem."""

    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    lam_x: float = Field(..., gt=0)
    lam_y: float = Field(..., gt=0)
    noise_variance: float = Field(..., ge=0)
    distribution: NoiseDistribution = NoiseDistribution.NORMAL
    payoff: list[list[float]]
    seed: int | None = None

    @model_validator(mode="after")
    def check_shape(self) -> "GameInstance":
        if len(self.payoff) != self.n or any(len(row) != self.m for row in self.payoff):
            raise ValueError(f"payoff must be {self.n}x{self.m}")
        return self
