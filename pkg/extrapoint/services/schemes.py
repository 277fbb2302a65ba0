"""
Extra-Point and Extra-Momentum Schemes for ExtraPoint.

Implements:
- the stochastic extra-point update (two projections per iteration)
- the stochastic extra-momentum update (one projection per iteration)
- the extra-gradient and OGDA baselines as parameter restrictions
- condition checkers, default/diminishing parameter choices
- theoretical bound calculators and the potential function
- run_solver, the replicated solver driver
"""

import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Protocol

import numpy as np
import numpy.typing as npt
import structlog

from extrapoint.core.exceptions import (
    ConfigError,
    NumericalError,
    ParameterValidationError,
)
from extrapoint.core.rng import replication_rng
from extrapoint.models.params import (
    ExtraMomentumParams,
    ExtraMomentumVerdict,
    ExtraPointParams,
    ExtraPointVerdict,
    TParameters,
)
from extrapoint.models.trace import SolverTrace
from extrapoint.services.vi_core import (
    StochasticMappingOracle,
    Vector,
    VIProblem,
    as_point,
    distance_squared,
)

logger = structlog.get_logger(__name__)

# Slack on the non-strict inequalities of the condition checks.
CONDITION_SLACK = 1e-12
DEFAULT_THETA = 0.125


class SchemeName(str, Enum):
    """Solver methods selectable by run_solver and the harness."""

    EXTRA_POINT = "extra_point"
    EXTRA_MOMENTUM = "extra_momentum"
    SZO_EXTRA_POINT = "szo_extra_point"
    SZO_EXTRA_MOMENTUM = "szo_extra_momentum"
    EXTRA_GRADIENT = "extra_gradient"
    OGDA = "ogda"

    @property
    def uses_extra_point(self) -> bool:
        return self in (
            SchemeName.EXTRA_POINT,
            SchemeName.SZO_EXTRA_POINT,
            SchemeName.EXTRA_GRADIENT,
        )

    @property
    def is_zeroth_order(self) -> bool:
        return self in (SchemeName.SZO_EXTRA_POINT, SchemeName.SZO_EXTRA_MOMENTUM)

    @property
    def is_baseline(self) -> bool:
        return self in (SchemeName.EXTRA_GRADIENT, SchemeName.OGDA)


class Stage(str, Enum):
    """Which point of an iteration an evaluation belongs to."""

    WARMUP = "warmup"
    CURRENT = "current"
    EXTRA = "extra"


class Evaluation(NamedTuple):
    """A mapping estimate and what it cost."""

    value: Vector
    samples: int
    function_evaluations: int


class MappingEvaluator(Protocol):
    """Source of mapping estimates used inside the update rules."""

    def evaluate(
        self, z: Vector, rng: np.random.Generator, k: int, stage: Stage
    ) -> Evaluation: ...


class OracleEvaluator:
    """One oracle call per evaluation."""

    def __init__(self, oracle: StochasticMappingOracle):
        self.oracle = oracle

    def evaluate(
        self, z: Vector, rng: np.random.Generator, k: int, stage: Stage
    ) -> Evaluation:
        return Evaluation(self.oracle.sample(z, rng), 1, 1)


@dataclass(frozen=True)
class SolverState:
    """
    Iterate pair (z^{k-1}, z^k) and the cached evaluation at z^{k-1}.

    ``f_prev`` was sampled at ``z_prev`` by the previous iteration (or by the
    warm-up evaluation at z^0) and is reused, never resampled.
    """

    z_prev: Vector
    z_curr: Vector
    f_prev: Vector
    k: int = 0


class StepResult(NamedTuple):
    """Outcome of one iteration."""

    state: SolverState
    samples_used: int
    extra_point: Vector | None = None
    function_evaluations: int = 0


def initial_state(
    problem: VIProblem,
    z0: npt.ArrayLike,
    rng: np.random.Generator,
    evaluator: MappingEvaluator | None = None,
) -> tuple[SolverState, Evaluation]:
    """
    Start a run at z^{-1} = z^0 = P(z0) with a fresh evaluation at z^0 cached.

    Returns:
        The initial state and the warm-up evaluation (for sample accounting)
    """
    source = evaluator or OracleEvaluator(problem.oracle)
    start = problem.project(as_point(z0, "z0"))
    warmup = source.evaluate(start, rng, 0, Stage.WARMUP)
    return SolverState(z_prev=start, z_curr=start.copy(), f_prev=warmup.value, k=0), warmup


def _checked(z: Vector, k: int) -> Vector:
    if not np.all(np.isfinite(z)):
        raise NumericalError("non-finite iterate", iteration=k)
    return z


# ============== Update Rules ==============


def extra_point_update(
    state: SolverState,
    params: ExtraPointParams,
    problem: VIProblem,
    evaluator: MappingEvaluator,
    rng: np.random.Generator,
) -> StepResult:
    """Extra-point update drawing its estimates from ``evaluator``."""
    z, z_prev, k = state.z_curr, state.z_prev, state.k
    momentum = z - z_prev

    current = evaluator.evaluate(z, rng, k, Stage.CURRENT)
    z_half = _checked(
        problem.project(z + params.beta * momentum - params.eta * current.value), k
    )
    extra = evaluator.evaluate(z_half, rng, k, Stage.EXTRA)
    z_next = _checked(
        problem.project(
            z
            - params.alpha * extra.value
            + params.gamma * momentum
            - params.tau * (current.value - state.f_prev)
        ),
        k,
    )
    return StepResult(
        state=SolverState(z_prev=z, z_curr=z_next, f_prev=current.value, k=k + 1),
        samples_used=current.samples + extra.samples,
        extra_point=z_half,
        function_evaluations=current.function_evaluations + extra.function_evaluations,
    )


def extra_momentum_update(
    state: SolverState,
    params: ExtraMomentumParams,
    problem: VIProblem,
    evaluator: MappingEvaluator,
    rng: np.random.Generator,
) -> StepResult:
    """Extra-momentum update drawing its estimates from ``evaluator``."""
    z, z_prev, k = state.z_curr, state.z_prev, state.k

    current = evaluator.evaluate(z, rng, k, Stage.CURRENT)
    z_next = _checked(
        problem.project(
            z
            - params.alpha * current.value
            + params.gamma * (z - z_prev)
            - params.tau * (current.value - state.f_prev)
        ),
        k,
    )
    return StepResult(
        state=SolverState(z_prev=z, z_curr=z_next, f_prev=current.value, k=k + 1),
        samples_used=current.samples,
        function_evaluations=current.function_evaluations,
    )


def extra_point_step(
    state: SolverState,
    params: ExtraPointParams,
    problem: VIProblem,
    rng: np.random.Generator,
) -> StepResult:
    """
    One stochastic extra-point iteration.

    z^{k+0.5} = P(z^k + beta (z^k - z^{k-1}) - eta F(z^k))
    z^{k+1}   = P(z^k - alpha F(z^{k+0.5}) + gamma (z^k - z^{k-1})
                  - tau (F(z^k) - F(z^{k-1})))

    F(z^k) is sampled once and used in both lines; F(z^{k-1}) is the cached
    evaluation carried by ``state``.

    Returns:
        StepResult with the new state, the extra point and samples_used = 2
    """
    return extra_point_update(state, params, problem, OracleEvaluator(problem.oracle), rng)


def extra_momentum_step(
    state: SolverState,
    params: ExtraMomentumParams,
    problem: VIProblem,
    rng: np.random.Generator,
) -> StepResult:
    """
    One stochastic extra-momentum iteration (one projection, one oracle call).

    z^{k+1} = P(z^k - alpha F(z^k) + gamma (z^k - z^{k-1}) - tau (F(z^k) - F(z^{k-1})))
    """
    return extra_momentum_update(
        state, params, problem, OracleEvaluator(problem.oracle), rng
    )


def extra_gradient_params(step_size: float) -> ExtraPointParams:
    """Extra-gradient as the extra-point restriction (alpha, 0, 0, alpha, 0)."""
    return ExtraPointParams(alpha=step_size, beta=0.0, gamma=0.0, eta=step_size, tau=0.0)


def ogda_params(step_size: float, theta: float = DEFAULT_THETA) -> ExtraMomentumParams:
    """OGDA as the extra-momentum restriction (alpha, gamma=0, tau=alpha)."""
    return ExtraMomentumParams(alpha=step_size, gamma=0.0, tau=step_size, theta=theta)


def extra_gradient_step(
    state: SolverState, step_size: float, problem: VIProblem, rng: np.random.Generator
) -> StepResult:
    """Stochastic extra-gradient baseline."""
    return extra_point_step(state, extra_gradient_params(step_size), problem, rng)


def ogda_step(
    state: SolverState, step_size: float, problem: VIProblem, rng: np.random.Generator
) -> StepResult:
    """Stochastic optimistic gradient descent-ascent baseline."""
    return extra_momentum_step(state, ogda_params(step_size), problem, rng)


# ============== Condition Checks ==============


def _require_constants(mu: float, lipschitz: float) -> float:
    if not mu > 0:
        raise ConfigError(f"mu must be positive, got {mu}")
    if lipschitz < mu * (1 - CONDITION_SLACK):
        raise ConfigError(f"L must be >= mu, got L={lipschitz}, mu={mu}")
    return lipschitz / mu


def compute_t_parameters(params: ExtraPointParams, mu: float, lipschitz: float) -> TParameters:
    """(t1, t2, t3, q) of the extra-point analysis."""
    gap = abs(params.gamma - params.beta)
    t1 = params.alpha * mu - 4 * params.gamma - 6 * gap - 4 * params.tau * lipschitz
    t2 = 2 * gap + 2 * params.gamma + 4 * params.tau * lipschitz
    t3 = 4 * gap + params.tau * lipschitz
    denominator = t1 - t2 - t3
    q = 2 * (1 - t3) / denominator if denominator > 0 else None
    return TParameters(t1=t1, t2=t2, t3=t3, q=q)


def check_extra_point_conditions(
    params: ExtraPointParams, mu: float, lipschitz: float
) -> ExtraPointVerdict:
    """
    Validate extra-point parameters.

    Requires eta = alpha, 2 alpha^2 L^2 + 2|gamma - beta| + 2 gamma + 2 alpha mu <= 1,
    0 <= t3 < t1 < 1 and t2 < t1 - t3. Each failed inequality is listed by name.
    """
    _require_constants(mu, lipschitz)
    t = compute_t_parameters(params, mu, lipschitz)
    budget = (
        2 * params.alpha**2 * lipschitz**2
        + 2 * abs(params.gamma - params.beta)
        + 2 * params.gamma
        + 2 * params.alpha * mu
        - 1
    )

    violated = []
    if not math.isclose(params.eta, params.alpha, rel_tol=CONDITION_SLACK, abs_tol=0.0):
        violated.append("eta = alpha")
    if budget > CONDITION_SLACK:
        violated.append("step budget")
    if t.t3 < 0:
        violated.append("t3 >= 0")
    if not t.t3 < t.t1:
        violated.append("t3 < t1")
    if not t.t1 < 1:
        violated.append("t1 < 1")
    if not t.t2 < t.t1 - t.t3:
        violated.append("t2 < t1 - t3")

    return ExtraPointVerdict(t=t, valid=not violated, violated=violated, step_budget=budget)


def check_extra_momentum_conditions(
    params: ExtraMomentumParams, mu: float, lipschitz: float
) -> ExtraMomentumVerdict:
    """
    Validate extra-momentum parameters against 1 + theta/kappa.

    Requires 1 + alpha mu - gamma >= 1 + theta/kappa, alpha/tau = 1 + theta/kappa
    (relative 1e-12) and 1/(8 tau^2 L^2 + 2 gamma) >= 1 + theta/kappa.
    """
    kappa = _require_constants(mu, lipschitz)
    threshold = 1 + params.theta / kappa
    margin = 1 + params.alpha * mu - params.gamma
    ratio = params.alpha / params.tau if params.tau > 0 else None
    denominator = 8 * params.tau**2 * lipschitz**2 + 2 * params.gamma
    optimism = 1 / denominator if denominator > 0 else None

    violated = []
    if margin < threshold - CONDITION_SLACK:
        violated.append("monotonicity margin")
    if ratio is None or not math.isclose(ratio, threshold, rel_tol=CONDITION_SLACK, abs_tol=0.0):
        violated.append("alpha/tau ratio")
    if optimism is not None and optimism < threshold - CONDITION_SLACK:
        violated.append("optimism margin")

    return ExtraMomentumVerdict(
        valid=not violated,
        violated=violated,
        threshold=threshold,
        monotonicity_margin=margin,
        step_ratio=ratio,
        optimism_margin=optimism,
    )


# ============== Parameter Choices ==============


def default_extra_point_params(mu: float, lipschitz: float) -> ExtraPointParams:
    """alpha = eta = 1/(4L), beta = gamma = 1/(64 kappa), tau = 1/(64 L kappa)."""
    kappa = _require_constants(mu, lipschitz)
    alpha = 1 / (4 * lipschitz)
    momentum = 1 / (64 * kappa)
    return ExtraPointParams(
        alpha=alpha,
        beta=momentum,
        gamma=momentum,
        eta=alpha,
        tau=1 / (64 * lipschitz * kappa),
    )


def default_extra_momentum_params(
    mu: float, lipschitz: float, theta: float = DEFAULT_THETA
) -> ExtraMomentumParams:
    """alpha = 1/(4L), tau = alpha/(1 + theta/kappa), gamma = 1/(8(kappa + theta))."""
    kappa = _require_constants(mu, lipschitz)
    if not 0 < theta <= 1:
        raise ConfigError(f"theta must lie in (0, 1], got {theta}")
    alpha = 1 / (4 * lipschitz)
    return ExtraMomentumParams(
        alpha=alpha,
        gamma=1 / (8 * (kappa + theta)),
        tau=alpha / (1 + theta / kappa),
        theta=theta,
    )


def diminishing_extra_point_params(k: int, mu: float, lipschitz: float) -> ExtraPointParams:
    """Diminishing extra-point parameters for iteration ``k`` (O(1/k) regime)."""
    if k < 0:
        raise ConfigError(f"iteration index must be nonnegative, got {k}")
    kappa = _require_constants(mu, lipschitz)
    alpha = 2 / ((k + 2) * mu)
    momentum = alpha**2 * mu**2 / 128
    return ExtraPointParams(
        alpha=alpha,
        beta=momentum,
        gamma=momentum,
        eta=alpha,
        tau=alpha**2 * mu / (128 * kappa),
    )


class DiminishingSchedule:
    """Per-iteration diminishing extra-point parameters."""

    def __init__(self, mu: float, lipschitz: float):
        _require_constants(mu, lipschitz)
        self.mu = mu
        self.lipschitz = lipschitz

    def __call__(self, k: int) -> ExtraPointParams:
        return diminishing_extra_point_params(k, self.mu, self.lipschitz)

    def __repr__(self) -> str:
        return f"<DiminishingSchedule(mu={self.mu}, L={self.lipschitz})>"


# ============== Bounds and Potentials ==============


def theoretical_bound_extra_point(
    k: int,
    d0: float,
    kappa: float,
    sigma: float,
    delta: float,
    diameter: float,
    lipschitz: float,
) -> float:
    """Extra-point bound under the default parameters."""
    contraction = (1 - 1 / (256 * kappa)) ** k
    floor = (
        40 * sigma**2 / (63 * lipschitz**2) + 32 * delta * diameter / (63 * lipschitz)
    ) * 256 * kappa
    return contraction * (283 / 256) * d0 + floor


def general_bound_extra_point(
    k: int,
    d0: float,
    t: TParameters,
    alpha: float,
    tau: float,
    sigma: float,
    delta: float,
    diameter: float,
    lipschitz: float,
) -> float:
    """Extra-point bound for any validated parameters, from the two-step recursion."""
    a, b, c, d = recursion_coefficients(t, alpha, tau, lipschitz)
    rate = 1 - (a - b) / 2
    return rate**k * (2 + a + b) / 2 * d0 + (c * sigma**2 + d * delta * diameter) * 2 / (a - b)


def recursion_coefficients(
    t: TParameters, alpha: float, tau: float, lipschitz: float
) -> tuple[float, float, float, float]:
    """(a, b, c, d) of d_{k+1} <= (1 - a) d_k + b d_{k-1} + c sigma^2 + d delta D."""
    scale = 1 - t.t3
    return (
        (t.t1 - t.t3) / scale,
        t.t2 / scale,
        8 * (alpha**2 + tau / lipschitz) / scale,
        2 * alpha / scale,
    )


def contraction_certificate(
    distances: npt.ArrayLike,
    t: TParameters,
    alpha: float,
    tau: float,
    lipschitz: float,
    sigma: float = 0.0,
    delta: float = 0.0,
    diameter: float = 0.0,
) -> npt.NDArray[np.float64]:
    """
    Slack of the two-step contraction per iteration.

    Entry k is
        (1 - (a-b)/2)(d_k + (a+b)/2 d_{k-1}) + c sigma^2 + d delta D
        - (d_{k+1} + (a+b)/2 d_k)
    with d_{-1} = d_0; nonnegative entries certify the recursion.
    """
    d_k = np.asarray(distances, dtype=np.float64)
    if d_k.shape[0] < 2:
        return np.zeros(0)
    a, b, c, d = recursion_coefficients(t, alpha, tau, lipschitz)
    half = (a + b) / 2
    previous = np.concatenate([d_k[:1], d_k[:-2]])
    rhs = (1 - (a - b) / 2) * (d_k[:-1] + half * previous) + c * sigma**2 + d * delta * diameter
    lhs = d_k[1:] + half * d_k[:-1]
    return rhs - lhs


def theoretical_bound_extra_momentum(
    k: int,
    d0: float,
    kappa: float,
    theta: float,
    tau: float,
    alpha: float,
    sigma: float,
    delta: float,
    mu: float,
) -> float:
    """Extra-momentum bound for validated parameters."""
    return (
        2 * (1 + theta / kappa) ** (-k) * d0
        + (kappa / theta + 1) * 32 * tau**2 * sigma**2
        + 2 * kappa * alpha * delta**2 / (theta * mu)
    )


def momentum_noise_floor(sigma: float, delta: float, mu: float, lipschitz: float) -> float:
    """Residual error of extra-momentum under the default parameters."""
    return 128 * sigma**2 / (mu * (8 * lipschitz + mu)) + 4 * delta**2 / mu**2


def sublinear_bound(
    k: int,
    d0: float,
    kappa: float,
    sigma: float,
    diameter: float,
    delta: float,
    mu: float,
) -> float:
    """O(1/k) bound of the diminishing schedule."""
    lipschitz = kappa * mu
    g = (
        2 * kappa**2 * diameter**2
        + diameter**2 / 64
        + diameter**2
        + 8 * sigma**2 / mu**2
        + sigma**2 / (128 * lipschitz**2)
    )
    q = max(133 * g / 9, 2 * d0)
    return q / (k + 2) + 256 * delta * diameter / (93 * mu)


def required_iterations_extra_point(kappa: float, d0: float, epsilon: float) -> int:
    """Iterations after which the noise-free default extra-point bound is <= epsilon."""
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    ratio = (283 / 256) * d0 / epsilon
    if ratio <= 1:
        return 0
    return math.ceil(256 * kappa * math.log(ratio))


def potential_value(
    z_k: Vector,
    z_km1: Vector,
    f_k: Vector,
    f_km1: Vector,
    z_star: Vector,
    tau: float,
    gamma: float,
    lipschitz: float,
) -> float:
    """
    V_k = 1/2 ||z^k - z*||^2 + tau (z^k - z*)^T (F(z^{k-1}) - F(z^k))
          + (2 tau^2 L^2 + gamma/2) ||z^k - z^{k-1}||^2
    """
    offset = z_k - z_star
    step = z_k - z_km1
    return float(
        0.5 * offset @ offset
        + tau * offset @ (f_km1 - f_k)
        + (2 * tau**2 * lipschitz**2 + gamma / 2) * step @ step
    )


# ============== Solver Driver ==============

ParamsLike = ExtraPointParams | ExtraMomentumParams | Callable[[int], ExtraPointParams]


@dataclass
class _ReplicationResult:
    distances: npt.NDArray[np.float64] | None
    step_lengths: npt.NDArray[np.float64]
    potentials: npt.NDArray[np.float64] | None
    samples: npt.NDArray[np.int64]
    function_evaluations: npt.NDArray[np.int64]
    wall_time: npt.NDArray[np.float64]
    iterates: list[Vector]
    final: Vector
    warmup_samples: int


def validate_params(
    method: SchemeName,
    params: ParamsLike,
    problem: VIProblem,
    override_validation: bool = False,
) -> None:
    """
    Gate a run on the convergence conditions of its parameters.

    Baselines and diminishing schedules bypass the gate; every other
    configuration must pass its checker unless ``override_validation`` is set.

    Raises:
        ConfigError: If the parameter type does not match the method
        ParameterValidationError: If validation fails without override
    """
    if method.uses_extra_point:
        if not (isinstance(params, ExtraPointParams) or callable(params)):
            raise ConfigError(f"{method.value} needs ExtraPointParams")
    elif not isinstance(params, ExtraMomentumParams):
        raise ConfigError(f"{method.value} needs ExtraMomentumParams")

    if method.is_baseline or not isinstance(params, (ExtraPointParams, ExtraMomentumParams)):
        return

    if isinstance(params, ExtraPointParams):
        verdict = check_extra_point_conditions(params, problem.mu, problem.lipschitz)
    else:
        verdict = check_extra_momentum_conditions(params, problem.mu, problem.lipschitz)

    if verdict.valid:
        return
    if override_validation:
        logger.warning(
            "validation_overridden", method=method.value, violated=verdict.violated
        )
        return
    raise ParameterValidationError(
        f"{method.value} parameters violate: {', '.join(verdict.violated)}",
        violated=verdict.violated,
    )


def _run_replication(
    problem: VIProblem,
    method: SchemeName,
    params: ParamsLike,
    max_iters: int,
    evaluator: MappingEvaluator,
    rng: np.random.Generator,
    z0: Vector,
    record_iterates: bool,
    replication: int,
) -> _ReplicationResult:
    z_star = problem.reference_solution
    momentum_family = not method.uses_extra_point

    started = time.perf_counter()
    state, warmup = initial_state(problem, z0, rng, evaluator)

    distances = np.zeros(max_iters + 1) if z_star is not None else None
    potentials = np.zeros(max_iters) if (momentum_family and z_star is not None) else None
    step_lengths = np.zeros(max_iters + 1)
    samples = np.zeros(max_iters + 1, dtype=np.int64)
    evaluations = np.zeros(max_iters + 1, dtype=np.int64)
    wall_time = np.zeros(max_iters + 1)
    iterates = [state.z_curr.copy()] if record_iterates else []
    if distances is not None:
        distances[0] = distance_squared(state.z_curr, z_star)

    for k in range(max_iters):
        if momentum_family:
            result = extra_momentum_update(state, params, problem, evaluator, rng)
            if potentials is not None:
                potentials[k] = potential_value(
                    state.z_curr,
                    state.z_prev,
                    result.state.f_prev,
                    state.f_prev,
                    z_star,
                    params.tau,
                    params.gamma,
                    problem.lipschitz,
                )
        else:
            step_params = params(k) if callable(params) else params
            result = extra_point_update(state, step_params, problem, evaluator, rng)

        state = result.state
        samples[k + 1] = samples[k] + result.samples_used
        evaluations[k + 1] = evaluations[k] + result.function_evaluations
        step_lengths[k + 1] = distance_squared(state.z_curr, state.z_prev)
        wall_time[k + 1] = time.perf_counter() - started
        if distances is not None:
            distances[k + 1] = distance_squared(state.z_curr, z_star)
        if record_iterates:
            iterates.append(state.z_curr.copy())
        logger.debug(
            "iteration",
            method=method.value,
            replication=replication,
            iteration=k + 1,
            dist_sq=None if distances is None else distances[k + 1],
            samples=int(samples[k + 1]),
        )

    return _ReplicationResult(
        distances=distances,
        step_lengths=step_lengths,
        potentials=potentials,
        samples=samples,
        function_evaluations=evaluations,
        wall_time=wall_time,
        iterates=iterates,
        final=state.z_curr,
        warmup_samples=warmup.samples,
    )


def run_solver(
    problem: VIProblem,
    method: SchemeName | str,
    params: ParamsLike,
    max_iters: int,
    replications: int,
    seed: int,
    *,
    z0: npt.ArrayLike | None = None,
    evaluator: MappingEvaluator | None = None,
    override_validation: bool = False,
    threads: int = 1,
) -> SolverTrace:
    """
    Run ``replications`` independent replications of a scheme for ``max_iters`` iterations.

    Replication r draws from the counter-based stream (seed, r), so traces do
    not depend on ``threads`` or on how many replications run.

    Args:
        problem: VI problem (distances are recorded when it has a reference solution)
        method: Scheme selector
        params: Scheme parameters, or a callable k -> ExtraPointParams
        max_iters: Iteration count K (0 records only z^0)
        replications: Number of replications R (>= 1)
        seed: Master seed
        z0: Starting point (defaults to the projection of the origin)
        evaluator: Mapping estimator; required for zeroth-order methods
        override_validation: Run even when the parameters fail their checks
        threads: Worker threads for replications

    Returns:
        SolverTrace aggregated in replication-index order

    Raises:
        ConfigError: Invalid sizes, missing evaluator or mismatched params
        ParameterValidationError: Parameters fail validation without override
        NumericalError: A replication produced a non-finite iterate
    """
    method = SchemeName(method)
    if max_iters < 0:
        raise ConfigError(f"max_iters must be nonnegative, got {max_iters}")
    if replications < 1:
        raise ConfigError(f"replications must be at least 1, got {replications}")
    if method.is_zeroth_order and evaluator is None:
        raise ConfigError(f"{method.value} needs a zeroth-order evaluator")
    validate_params(method, params, problem, override_validation)

    source = evaluator or OracleEvaluator(problem.oracle)
    start = as_point(np.zeros(problem.dim) if z0 is None else z0, "z0")

    def replicate(r: int) -> _ReplicationResult:
        try:
            return _run_replication(
                problem,
                method,
                params,
                max_iters,
                source,
                replication_rng(seed, r),
                start,
                record_iterates=(r == 0),
                replication=r,
            )
        except NumericalError as e:
            raise NumericalError(e.message, replication=r) from e

    logger.info(
        "solver_started",
        method=method.value,
        problem=problem.name,
        iterations=max_iters,
        replications=replications,
        threads=threads,
    )
    if threads > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(replicate, range(replications)))
    else:
        results = [replicate(r) for r in range(replications)]

    first = results[0]
    trace = SolverTrace(
        method=method.value,
        iterates=first.iterates,
        distances=None
        if first.distances is None
        else np.vstack([res.distances for res in results]),
        step_lengths=np.vstack([res.step_lengths for res in results]),
        cumulative_samples=first.samples,
        function_evaluations=first.function_evaluations,
        wall_time=np.mean([res.wall_time for res in results], axis=0),
        potential_values=None
        if first.potentials is None
        else np.vstack([res.potentials for res in results]),
        warmup_samples=first.warmup_samples,
        final_iterates=[res.final for res in results],
    )
    logger.info(
        "solver_finished",
        method=method.value,
        final_mean_dist_sq=None
        if trace.mean_distances is None
        else float(trace.mean_distances[-1]),
        samples=int(trace.cumulative_samples[-1]),
    )
    return trace
