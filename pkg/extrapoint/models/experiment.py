"""
Experiment configuration models.

An experiment is described by a TOML file validated into ExperimentConfig:

    method = "extra_momentum"
    iterations = 2000
    replications = 10
    seed = 7

    [problem]
    kind = "synthetic"
    dim = 20
    kappa = 10.0

Unknown keys are rejected. CLI flags override file values via ``with_overrides``.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import Field, ValidationError, model_validator

from extrapoint.core.exceptions import ConfigError
from extrapoint.models.base import FrozenModel


class ProblemKind(str, Enum):
    SYNTHETIC = "synthetic"
    SADDLE = "saddle"
    GAME_NORMAL = "game-normal"
    GAME_LOGNORMAL = "game-lognormal"

    @property
    def is_game(self) -> bool:
        return self in (ProblemKind.GAME_NORMAL, ProblemKind.GAME_LOGNORMAL)


class ParamsSource(str, Enum):
    DEFAULT = "default"
    EXPLICIT = "explicit"
    DIMINISHING = "diminishing"


class ProblemSpec(FrozenModel):
    """Problem generator settings."""

    kind: ProblemKind = ProblemKind.SYNTHETIC
    # synthetic quadratic VI
    dim: int = Field(default=20, ge=1)
    structure: Literal["skew", "symmetric"] = "skew"
    mu: float = Field(default=1.0, gt=0)
    kappa: float = Field(default=10.0, ge=1)
    radius: float | None = Field(default=None, gt=0)
    # saddle and game dimensions
    n: int = Field(default=10, ge=1)
    m: int = Field(default=20, ge=1)
    lam_x: float = Field(default=1.0, gt=0)
    lam_y: float = Field(default=1.0, gt=0)
    noise_variance: float = Field(default=0.0, ge=0)
    value_noise: float = Field(default=0.0, ge=0)
    game_file: Path | None = None


class ExplicitParams(FrozenModel):
    """Hand-picked scheme parameters; unset fields are not used."""

    alpha: float | None = Field(default=None, ge=0)
    beta: float | None = Field(default=None, ge=0)
    gamma: float | None = Field(default=None, ge=0)
    eta: float | None = Field(default=None, ge=0)
    tau: float | None = Field(default=None, ge=0)
    theta: float = Field(default=0.125, gt=0, le=1)
    step_size: float | None = Field(default=None, gt=0)


class ZerothOrderSpec(FrozenModel):
    """Batch schedule of zeroth-order runs."""

    schedule: Literal["auto", "extra_point", "extra_momentum", "linear"] = "auto"
    rho: float | None = Field(default=None, gt=0)
    # linear schedule only: t_k = max(1, ceil(batch_scale k))
    batch_scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_batch_scale(self) -> "ZerothOrderSpec":
        if self.batch_scale != 1.0 and self.schedule != "linear":
            raise ValueError("batch_scale needs the linear schedule")
        return self


class OutputSpec(FrozenModel):
    dir: Path | None = None
    csv: bool = True
    svg: bool = True
    log_scale: bool = True
    wall_clock: bool = False
    per_replication: bool = False


MethodName = Literal[
    "extra_point",
    "extra_momentum",
    "szo_extra_point",
    "szo_extra_momentum",
    "extra_gradient",
    "ogda",
]
EXTRA_POINT_FAMILY = frozenset({"extra_point", "szo_extra_point", "extra_gradient"})


class ExperimentConfig(FrozenModel):
    """Validated experiment description."""

    method: MethodName = "extra_point"
    iterations: int = Field(default=1000, ge=0)
    replications: int = Field(default=1, ge=1)
    seed: int | None = Field(default=None, ge=0)
    threads: int | None = Field(default=None, ge=1)
    params_source: ParamsSource = ParamsSource.DEFAULT
    oracle: Literal["first_order", "zeroth_order"] = "first_order"
    override_validation: bool = False
    horizon_rule: Literal["figure", "contraction"] = "figure"
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    explicit: ExplicitParams = Field(default_factory=ExplicitParams)
    zeroth_order: ZerothOrderSpec = Field(default_factory=ZerothOrderSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def check_method(self) -> "ExperimentConfig":
        if (
            self.params_source is ParamsSource.DIMINISHING
            and self.method not in EXTRA_POINT_FAMILY
        ):
            raise ValueError("diminishing parameters apply to extra-point methods only")
        if self.uses_zeroth_order and self.problem.kind is ProblemKind.SYNTHETIC:
            raise ValueError("zeroth-order runs need a saddle or game problem")
        return self

    @property
    def uses_zeroth_order(self) -> bool:
        return self.method.startswith("szo_") or self.oracle == "zeroth_order"

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("a seed is required (config key 'seed' or --seed)")
        return self.seed

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with top-level values replaced; None values are ignored."""
        values = {key: value for key, value in overrides.items() if value is not None}
        if not values:
            return self
        try:
            return ExperimentConfig.model_validate({**self.model_dump(), **values})
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "config"
    return f"{location}: {first['msg']}"


def load_experiment_config(path: Path | str | None) -> ExperimentConfig:
    """
    Read and validate a TOML experiment file (defaults when ``path`` is None).

    Raises:
        ConfigError: Missing file, TOML syntax error or schema violation
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_describe(e)}") from e
