"""
Zeroth-Order Oracles for ExtraPoint.

Randomized-smoothing gradient estimates for black-box saddle-point problems
min_x max_y f(x, y), where only noisy values f(x, y, xi) are available:
- unit-sphere sampling and the single-draw estimator
- mini-batch averaging with the prescribed batch schedules
- variance bound and sample-complexity arithmetic
- ZerothOrderMappingOracle, which plugs the estimator into every scheme
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Iterator
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import Field

from extrapoint.core.exceptions import ConfigError, OracleError
from extrapoint.models.base import FrozenModel
from extrapoint.models.params import ExtraMomentumParams, ExtraPointParams
from extrapoint.services.schemes import (
    Evaluation,
    SolverState,
    Stage,
    StepResult,
    extra_momentum_update,
    extra_point_update,
)
from extrapoint.services.vi_core import Vector, VIProblem

logger = structlog.get_logger(__name__)

# Draws per vectorized chunk; bounds memory for matrix-valued noise.
CHUNK_SIZE = 4096
DEFAULT_LINEAR_RHO = 1e-8


# ============== Function Oracles ==============


class NoisyFunctionOracle(ABC):
    """
    Stochastic value oracle f(x, y, xi) of a saddle function.

    ``value`` is vectorized over a leading batch axis; one noise draw ``xi``
    is shared by every evaluation that receives it.
    """

    n: int
    m: int
    lipschitz_value: float
    gradient_noise: float
    gradient_lipschitz: float

    @abstractmethod
    def draw(self, rng: np.random.Generator, size: int) -> Any:
        """Draw ``size`` noise realizations."""

    @abstractmethod
    def value(self, x: npt.NDArray, y: npt.NDArray, xi: Any) -> npt.NDArray:
        """Values for x of shape (t, n), y of shape (t, m) and t noise draws."""

    def evaluate(self, x: Vector, y: Vector, rng: np.random.Generator) -> float:
        """Single noisy value f(x, y, xi) with a fresh xi."""
        return float(self.value(x[None, :], y[None, :], self.draw(rng, 1))[0])

    def differences(
        self,
        x: Vector,
        y: Vector,
        u: npt.NDArray,
        v: npt.NDArray,
        params: "SmoothingParams",
        rng: np.random.Generator,
    ) -> tuple[npt.NDArray, npt.NDArray]:
        """
        Value differences of one batch of draws, one fresh xi per row.

        Returns f(x + rho_x u, y, xi) - f(x, y, xi) and f(x, y + rho_y v, xi) - f(x, y, xi).
        Subclasses may override this with any sampler that has the same joint law.
        """
        size = u.shape[0]
        xi = self.draw(rng, size)
        xs = np.broadcast_to(x, (size, self.n))
        ys = np.broadcast_to(y, (size, self.m))
        base = self.value(xs, ys, xi)
        shifted_x = self.value(xs + params.rho_x * u, ys, xi)
        shifted_y = self.value(xs, ys + params.rho_y * v, xi)
        return shifted_x - base, shifted_y - base


class SmoothingParams(FrozenModel):
    """Smoothing radii of the x- and y-blocks."""

    rho_x: float = Field(..., gt=0)
    rho_y: float = Field(..., gt=0)


# ============== Sphere Sampling and Estimators ==============


def sample_unit_sphere(
    dim: int, rng: np.random.Generator, size: int | None = None
) -> npt.NDArray[np.float64]:
    """
    Uniform draw(s) from the unit sphere in R^dim by normalizing Gaussians.

    Returns:
        Vector of shape (dim,), or (size, dim) when ``size`` is given
    """
    if dim < 1:
        raise ConfigError(f"sphere dimension must be positive, got {dim}")
    shape = (dim,) if size is None else (size, dim)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _chunks(total: int) -> Iterator[int]:
    remaining = total
    while remaining > 0:
        size = min(CHUNK_SIZE, remaining)
        remaining -= size
        yield size


def _draw_chunk(
    oracle: NoisyFunctionOracle,
    x: Vector,
    y: Vector,
    params: SmoothingParams,
    size: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    u = sample_unit_sphere(oracle.n, rng, size)
    v = sample_unit_sphere(oracle.m, rng, size)
    diff_x, diff_y = oracle.differences(x, y, u, v, params, rng)
    if not (np.all(np.isfinite(diff_x)) and np.all(np.isfinite(diff_y))):
        raise OracleError("function oracle returned non-finite values")

    grad_x = (oracle.n / params.rho_x) * diff_x[:, None] * u
    grad_y = (oracle.m / params.rho_y) * diff_y[:, None] * v
    # y-block sign flipped: the mapping is (grad_x f; -grad_y f)
    return np.hstack([grad_x, -grad_y])


def zeroth_order_draws(
    oracle: NoisyFunctionOracle,
    z: Vector,
    params: SmoothingParams,
    t: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    """
    ``t`` independent zeroth-order estimates at z = (x, y), one per row.

    Each draw uses a fresh (xi, u, v); the base value f(x, y, xi) is shared by
    the x- and y-differences of the same draw.
    """
    if t < 1:
        raise ConfigError(f"batch size must be at least 1, got {t}")
    x, y = z[: oracle.n], z[oracle.n :]
    return np.vstack([_draw_chunk(oracle, x, y, params, size, rng) for size in _chunks(t)])


def zeroth_order_gradient(
    oracle: NoisyFunctionOracle,
    z: Vector,
    params: SmoothingParams,
    rng: np.random.Generator,
) -> Vector:
    """Single-draw estimate (F_rho_x; -F_rho_y) at z = (x, y)."""
    return zeroth_order_draws(oracle, z, params, 1, rng)[0]


class BatchEstimate(NamedTuple):
    """Mini-batch mean and its cost."""

    value: Vector
    samples: int
    function_evaluations: int


def batched_zeroth_order_gradient(
    oracle: NoisyFunctionOracle,
    z: Vector,
    params: SmoothingParams,
    t: int,
    rng: np.random.Generator,
) -> BatchEstimate:
    """
    Mean of ``t`` independent zeroth-order draws.

    Draws are summed chunk by chunk in a fixed order. Each draw counts as one
    sample and three function evaluations.
    """
    if t < 1:
        raise ConfigError(f"batch size must be at least 1, got {t}")
    x, y = z[: oracle.n], z[oracle.n :]
    total = np.zeros(oracle.n + oracle.m)
    for size in _chunks(t):
        total += _draw_chunk(oracle, x, y, params, size, rng).sum(axis=0)
    return BatchEstimate(total / t, t, 3 * t)


def sigma_tilde(
    n: int,
    m: int,
    lipschitz_value: float,
    sigma: float,
    rho_x: float,
    rho_y: float,
    lipschitz: float,
) -> float:
    """
    Variance bound of the single-draw estimator.

    2 max{n M^2 + n sigma^2 + n^2 rho_x^2 L^2, m M^2 + m sigma^2 + m^2 rho_y^2 L^2}
    """
    if min(n, m, lipschitz_value, sigma, rho_x, rho_y, lipschitz) < 0:
        raise ConfigError("sigma_tilde arguments must be nonnegative")
    x_branch = n * lipschitz_value**2 + n * sigma**2 + n**2 * rho_x**2 * lipschitz**2
    y_branch = m * lipschitz_value**2 + m * sigma**2 + m**2 * rho_y**2 * lipschitz**2
    return 2 * max(x_branch, y_branch)


# ============== Batch Schedules ==============


class ScheduleVariant(str, Enum):
    """Batch-size rules."""

    EXTRA_POINT = "extra_point"
    EXTRA_MOMENTUM = "extra_momentum"
    LINEAR = "linear"


def contraction_constant(variant: ScheduleVariant, kappa: float) -> float:
    """C = 1 - 1/(256 kappa) (extra-point) or 1 - 1/(8 kappa + 1) (extra-momentum)."""
    if variant is ScheduleVariant.EXTRA_POINT:
        return 1 - 1 / (256 * kappa)
    if variant is ScheduleVariant.EXTRA_MOMENTUM:
        return 1 - 1 / (8 * kappa + 1)
    raise ConfigError(f"{variant.value} schedule has no contraction constant")


class BatchSchedule(FrozenModel):
    """Per-iteration batch sizes and fixed smoothing radii for a horizon K."""

    variant: ScheduleVariant
    horizon: int = Field(..., ge=1)
    kappa: float = Field(..., ge=1)
    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    rho_x: float = Field(..., gt=0)
    rho_y: float = Field(..., gt=0)
    batch_scale: float = Field(default=1.0, gt=0)

    @property
    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(rho_x=self.rho_x, rho_y=self.rho_y)

    def batch_size(self, k: int) -> int:
        """
        t_k for iteration k (k = -1 sizes the warm-up evaluation at z^0).

        The extra point of iteration k uses t_{k+0.5} = t_k.
        """
        if self.variant is ScheduleVariant.LINEAR:
            return max(1, math.ceil(self.batch_scale * k))
        c = contraction_constant(self.variant, self.kappa)
        exponent = k + 1 if self.variant is ScheduleVariant.EXTRA_POINT else k
        return max(1, math.ceil(self.horizon * c ** (-exponent)))

    def batch_sizes(self) -> list[int]:
        """[t_0, ..., t_{K-1}]."""
        return [self.batch_size(k) for k in range(self.horizon)]

    def total_samples(self, evaluations_per_iteration: int) -> int:
        """Exact (ceiled) draws over the horizon."""
        return evaluations_per_iteration * sum(self.batch_sizes())


def make_schedule(
    variant: ScheduleVariant | str,
    horizon: int,
    kappa: float,
    n: int,
    m: int,
    rho: float | None = None,
    batch_scale: float = 1.0,
) -> BatchSchedule:
    """
    Batch schedule and smoothing radii for a pre-declared horizon K.

    extra_point:    t_k = ceil(K C^{-(k+1)}), rho_x = C^K / (sqrt(2) n kappa)
    extra_momentum: t_k = ceil(K C^{-k}),     rho_x = C^{K/2} / (sqrt(2) n kappa)
    linear:         t_k = max(1, ceil(s k)) with rho_x = rho_y = ``rho`` (1e-8 by default)

    ``rho`` overrides the radii of the prescribed variants as well. The batch
    scale s applies to the linear schedule only.
    """
    variant = ScheduleVariant(variant)
    if horizon < 1:
        raise ConfigError(f"schedule horizon must be at least 1, got {horizon}")
    if kappa < 1:
        raise ConfigError(f"kappa must be >= 1, got {kappa}")
    if batch_scale <= 0:
        raise ConfigError(f"batch scale must be positive, got {batch_scale}")
    if batch_scale != 1.0 and variant is not ScheduleVariant.LINEAR:
        raise ConfigError(f"batch scale applies to the linear schedule, not {variant.value}")

    if variant is ScheduleVariant.LINEAR:
        rho_x = rho_y = DEFAULT_LINEAR_RHO if rho is None else rho
    elif rho is not None:
        rho_x = rho_y = rho
    else:
        c = contraction_constant(variant, kappa)
        power = horizon if variant is ScheduleVariant.EXTRA_POINT else horizon / 2
        scale = c**power / (math.sqrt(2) * kappa)
        rho_x, rho_y = scale / n, scale / m

    return BatchSchedule(
        variant=variant,
        horizon=horizon,
        kappa=kappa,
        n=n,
        m=m,
        rho_x=rho_x,
        rho_y=rho_y,
        batch_scale=batch_scale,
    )


def total_samples(variant: ScheduleVariant | str, horizon: int, kappa: float) -> int:
    """
    Exact draw count sum_k (t_k + t_{k+0.5}) (extra-point) or sum_k t_k (extra-momentum).
    """
    variant = ScheduleVariant(variant)
    if variant is ScheduleVariant.LINEAR:
        raise ConfigError("total_samples covers the prescribed schedules only")
    schedule = make_schedule(variant, horizon, kappa, 1, 1)
    per_iteration = 2 if variant is ScheduleVariant.EXTRA_POINT else 1
    return schedule.total_samples(per_iteration)


def closed_form_total_samples(
    variant: ScheduleVariant | str, horizon: int, kappa: float
) -> float:
    """
    Geometric sum of the un-ceiled schedule.

    extra_point:    2K (C^{-K} - 1)/(1 - C)
    extra_momentum: K (C^{-K} - 1)/(C^{-1} - 1)
    The exact ceiled sum exceeds it by less than one draw per term.

    The extra-momentum value is the exact sum of K C^{-k} for k < K. The
    commonly quoted K (C^{-K} - 1)/(1 - C) is larger by the factor
    1/C = 1 + 1/(8 kappa).
    """
    variant = ScheduleVariant(variant)
    c = contraction_constant(variant, kappa)
    if variant is ScheduleVariant.EXTRA_POINT:
        return 2 * horizon * (c ** (-horizon) - 1) / (1 - c)
    return horizon * (c ** (-horizon) - 1) / (1 / c - 1)


# ============== Mapping Oracle Adapter ==============


class ZerothOrderMappingOracle:
    """
    Mapping evaluator backed by mini-batched zeroth-order estimates.

    Iteration k draws t_k samples at z^k and t_{k+0.5} = t_k at the extra
    point; the warm-up evaluation at z^0 uses t_{-1}.
    """

    def __init__(self, function_oracle: NoisyFunctionOracle, schedule: BatchSchedule):
        if (schedule.n, schedule.m) != (function_oracle.n, function_oracle.m):
            raise ConfigError("schedule dimensions do not match the function oracle")
        self.function_oracle = function_oracle
        self.schedule = schedule

    @property
    def sigma_tilde(self) -> float:
        """Variance bound of one draw for this oracle and smoothing."""
        oracle = self.function_oracle
        return sigma_tilde(
            oracle.n,
            oracle.m,
            oracle.lipschitz_value,
            math.sqrt(oracle.gradient_noise),
            self.schedule.rho_x,
            self.schedule.rho_y,
            oracle.gradient_lipschitz,
        )

    def batch_variance_bound(self, k: int) -> float:
        """2 sigma_tilde^2 / t_k."""
        return 2 * self.sigma_tilde / self.schedule.batch_size(k)

    def evaluate(
        self, z: Vector, rng: np.random.Generator, k: int, stage: Stage
    ) -> Evaluation:
        t = self.schedule.batch_size(-1 if stage is Stage.WARMUP else k)
        estimate = batched_zeroth_order_gradient(
            self.function_oracle, z, self.schedule.smoothing, t, rng
        )
        return Evaluation(estimate.value, estimate.samples, estimate.function_evaluations)


def szo_extra_point_step(
    state: SolverState,
    params: ExtraPointParams,
    problem: VIProblem,
    zo_oracle: ZerothOrderMappingOracle,
    rng: np.random.Generator,
) -> StepResult:
    """Extra-point iteration ``state.k`` with batched zeroth-order estimates."""
    return extra_point_update(state, params, problem, zo_oracle, rng)


def szo_extra_momentum_step(
    state: SolverState,
    params: ExtraMomentumParams,
    problem: VIProblem,
    zo_oracle: ZerothOrderMappingOracle,
    rng: np.random.Generator,
) -> StepResult:
    """Extra-momentum iteration ``state.k`` with batched zeroth-order estimates."""
    return extra_momentum_update(state, params, problem, zo_oracle, rng)
