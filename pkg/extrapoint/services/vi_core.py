"""
Variational Inequality Core for ExtraPoint.

Defines the VI problem abstraction:
- FeasibleSet: Euclidean projection onto a bounded convex set (ball, product)
- DeterministicMapping: F with strong-monotonicity modulus mu and Lipschitz L
- StochasticMappingOracle: sampled F(z, xi) with declared bias and variance
- VIProblem: feasible set + oracle + constants + optional reference solution

Also provides the empirical checks of the mapping and oracle contracts.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt
import structlog

from extrapoint.core.config import get_settings
from extrapoint.core.exceptions import ConfigError, NumericalError, OracleError
from extrapoint.models.base import ReportModel

logger = structlog.get_logger(__name__)

Vector = npt.NDArray[np.float64]

# Monotonicity passes when the observed ratio is within this relative slack of mu.
MONOTONICITY_SLACK = 1e-9
MAX_DEGENERATE_RESAMPLES = 100


def as_point(z: npt.ArrayLike, name: str = "z") -> Vector:
    """
    Convert ``z`` to a finite 1-D float vector.

    Raises:
        NumericalError: If any entry is NaN or infinite
    """
    point = np.asarray(z, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(point)):
        raise NumericalError(f"{name} has non-finite entries")
    return point


def distance_squared(z: npt.ArrayLike, z_star: npt.ArrayLike) -> float:
    """
    Squared Euclidean distance ||z - z*||^2.

    Raises:
        ValueError: If the dimensions differ
    """
    a = np.asarray(z, dtype=np.float64).reshape(-1)
    b = np.asarray(z_star, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    return float(diff @ diff)


# ============== Feasible Sets ==============


class FeasibleSet(ABC):
    """Bounded closed convex set with a Euclidean projection."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Ambient dimension."""

    @property
    @abstractmethod
    def diameter(self) -> float:
        """Upper bound D on ||z - z'|| over the set."""

    @abstractmethod
    def project(self, z: Vector) -> Vector:
        """Euclidean projection of ``z`` onto the set."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> Vector:
        """Random point of the set (used by empirical probes)."""

    def contains(self, z: Vector, atol: float = 1e-10) -> bool:
        """Whether ``z`` lies in the set up to ``atol``."""
        return bool(np.linalg.norm(self.project(z) - z) <= atol)


class BallSet(FeasibleSet):
    """Closed Euclidean ball {z : ||z - center|| <= radius}."""

    def __init__(self, dim: int, radius: float, center: npt.ArrayLike | None = None):
        if dim < 1:
            raise ConfigError(f"ball dimension must be positive, got {dim}")
        if not radius > 0:
            raise ConfigError(f"ball radius must be positive, got {radius}")
        self._dim = int(dim)
        self.radius = float(radius)
        self.center = (
            np.zeros(self._dim) if center is None else as_point(center, "center")
        )
        if self.center.shape != (self._dim,):
            raise ConfigError("ball center has the wrong dimension")

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def project(self, z: Vector) -> Vector:
        offset = z - self.center
        norm = float(np.linalg.norm(offset))
        if norm <= self.radius:
            return np.array(z, dtype=np.float64, copy=True)
        return self.center + offset * (self.radius / norm)

    def sample(self, rng: np.random.Generator) -> Vector:
        direction = rng.standard_normal(self._dim)
        direction /= np.linalg.norm(direction)
        scale = self.radius * rng.random() ** (1.0 / self._dim)
        return self.center + scale * direction

    def __repr__(self) -> str:
        return f"<BallSet(dim={self._dim}, radius={self.radius})>"


class ProductSet(FeasibleSet):
    """Cartesian product of feasible sets; the projection acts blockwise."""

    def __init__(self, blocks: Sequence[FeasibleSet]):
        if not blocks:
            raise ConfigError("product set needs at least one block")
        self.blocks = tuple(blocks)
        self.offsets = np.cumsum([0] + [b.dim for b in self.blocks])

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(b.diameter**2 for b in self.blocks))

    def split(self, z: Vector) -> list[Vector]:
        """Split a joint point into its block components."""
        return [z[lo:hi] for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    def project(self, z: Vector) -> Vector:
        return np.concatenate(
            [block.project(part) for block, part in zip(self.blocks, self.split(z))]
        )

    def sample(self, rng: np.random.Generator) -> Vector:
        return np.concatenate([block.sample(rng) for block in self.blocks])

    def __repr__(self) -> str:
        return f"<ProductSet(blocks={list(self.blocks)})>"


# ============== Mappings and Oracles ==============


@dataclass(frozen=True)
class DeterministicMapping:
    """Strongly monotone, Lipschitz continuous mapping F."""

    evaluate: Callable[[Vector], Vector]
    mu: float
    lipschitz: float

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ConfigError(f"strong monotonicity modulus must be positive, got {self.mu}")
        if self.lipschitz < self.mu * (1 - 1e-12):
            raise ConfigError(
                f"Lipschitz constant {self.lipschitz} is smaller than mu {self.mu}"
            )

    @property
    def kappa(self) -> float:
        return self.lipschitz / self.mu

    def __call__(self, z: Vector) -> Vector:
        return np.asarray(self.evaluate(z), dtype=np.float64)


@dataclass(frozen=True)
class StochasticMappingOracle:
    """
    Sampled mapping F(z, xi).

    ``bias`` is the declared bound on E||F(z, xi) - F(z)|| and ``variance``
    the declared bound on E||F(z, xi) - F(z)||^2. ``systematic_bias`` bounds
    ||E F(z, xi) - F(z)||, the part of the bias that does not average out;
    it is what the convergence bounds consume.
    """

    sample_fn: Callable[[Vector, np.random.Generator], Vector]
    bias: float = 0.0
    variance: float = 0.0
    mapping: DeterministicMapping | None = None
    systematic_bias: float = 0.0
    name: str = "oracle"

    def __post_init__(self) -> None:
        if self.bias < 0 or self.variance < 0 or self.systematic_bias < 0:
            raise ConfigError("oracle bias and variance must be nonnegative")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def sample(self, z: Vector, rng: np.random.Generator) -> Vector:
        """Draw one oracle evaluation at ``z``."""
        try:
            value = np.asarray(self.sample_fn(z, rng), dtype=np.float64)
        except (ArithmeticError, ValueError) as e:
            raise OracleError(f"{self.name} failed at z: {e}") from e
        return value


def deterministic_oracle(mapping: DeterministicMapping, name: str = "exact") -> StochasticMappingOracle:
    """Noise-free oracle returning F(z) exactly."""
    return StochasticMappingOracle(
        sample_fn=lambda z, rng: mapping(z),
        bias=0.0,
        variance=0.0,
        mapping=mapping,
        name=name,
    )


def gaussian_noise_oracle(
    mapping: DeterministicMapping,
    variance: float,
    offset: npt.ArrayLike | None = None,
    declared_bias: float | None = None,
    name: str = "gaussian",
) -> StochasticMappingOracle:
    """
    Oracle F(z) + c + N(0, (variance/n) I).

    The declared bias defaults to sqrt(variance) + ||c|| (Jensen), the declared
    variance to variance + ||c||^2.

    Args:
        mapping: Underlying deterministic mapping
        variance: Total noise variance sigma^2
        offset: Optional constant offset c (a systematic bias)
        declared_bias: Override of the declared bias
        name: Oracle label used in diagnostics
    """
    if variance < 0:
        raise ConfigError(f"noise variance must be nonnegative, got {variance}")
    c = None if offset is None else np.asarray(offset, dtype=np.float64)
    c_norm = 0.0 if c is None else float(np.linalg.norm(c))

    def sample_fn(z: Vector, rng: np.random.Generator) -> Vector:
        value = mapping(z)
        if variance > 0:
            value = value + rng.standard_normal(value.shape[0]) * math.sqrt(
                variance / value.shape[0]
            )
        if c is not None:
            value = value + c
        return value

    return StochasticMappingOracle(
        sample_fn=sample_fn,
        bias=math.sqrt(variance) + c_norm if declared_bias is None else declared_bias,
        variance=variance + c_norm**2,
        mapping=mapping,
        systematic_bias=c_norm,
        name=name,
    )


# ============== Problem ==============


@dataclass(frozen=True)
class VIProblem:
    """Strongly monotone VI over a bounded feasible set."""

    feasible_set: FeasibleSet
    oracle: StochasticMappingOracle
    mu: float
    lipschitz: float
    reference_solution: Vector | None = None
    name: str = "vi"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.kappa < 1 - 1e-12:
            raise ConfigError(f"condition number must be >= 1, got {self.kappa}")
        if self.reference_solution is not None:
            z_star = as_point(self.reference_solution, "reference_solution")
            if z_star.shape != (self.feasible_set.dim,):
                raise ConfigError("reference solution has the wrong dimension")

    @property
    def kappa(self) -> float:
        return self.lipschitz / self.mu

    @property
    def dim(self) -> int:
        return self.feasible_set.dim

    @property
    def diameter(self) -> float:
        return self.feasible_set.diameter

    @property
    def mapping(self) -> DeterministicMapping:
        if self.oracle.mapping is None:
            raise OracleError(f"problem {self.name} has no known deterministic mapping")
        return self.oracle.mapping

    def project(self, z: Vector) -> Vector:
        return self.feasible_set.project(z)

    def with_reference(self, z_star: npt.ArrayLike) -> "VIProblem":
        """Copy of the problem carrying ``z_star`` as reference solution."""
        return replace(self, reference_solution=as_point(z_star, "z_star"))

    def with_oracle(self, oracle: StochasticMappingOracle) -> "VIProblem":
        """Copy of the problem using a different oracle."""
        return replace(self, oracle=oracle)


def projected_residual(problem: VIProblem, z: Vector) -> float:
    """Natural residual ||z - P(z - F(z))||; zero exactly at the solution."""
    return float(np.linalg.norm(z - problem.project(z - problem.mapping(z))))


# ============== Empirical Checks ==============


class MonotonicityReport(ReportModel):
    """Observed strong-monotonicity ratio over random pairs."""

    min_observed_ratio: float
    declared_mu: float
    num_probes: int
    passed: bool


class LipschitzReport(ReportModel):
    """Observed Lipschitz ratio over random pairs."""

    max_observed_ratio: float
    declared_lipschitz: float
    num_probes: int
    passed: bool


class OracleContractReport(ReportModel):
    """Monte-Carlo estimates of the oracle bias and variance."""

    max_bias_hat: float
    max_var_hat: float
    declared_bias: float
    declared_variance: float
    bias_hat: list[float]
    var_hat: list[float]
    passed: bool


class ProjectionReport(ReportModel):
    """Idempotence, co-coercivity and diameter checks of a projection."""

    max_idempotence_error: float
    min_cocoercivity_gap: float
    max_pair_distance: float
    num_pairs: int
    passed: bool


class ReferenceSolutionReport(ReportModel):
    """Minimum of F(z*)^T (z - z*) over probed feasible points."""

    min_residual: float
    num_probes: int
    passed: bool


def _distinct_pair(
    feasible_set: FeasibleSet, rng: np.random.Generator
) -> tuple[Vector, Vector]:
    for _ in range(MAX_DEGENERATE_RESAMPLES):
        z, z_prime = feasible_set.sample(rng), feasible_set.sample(rng)
        if distance_squared(z, z_prime) > 0:
            return z, z_prime
    raise NumericalError("feasible set sampler keeps returning identical points")


def verify_monotonicity(
    mapping: DeterministicMapping,
    feasible_set: FeasibleSet,
    num_probes: int,
    rng: np.random.Generator,
) -> MonotonicityReport:
    """
    Probe (F(z) - F(z'))^T (z - z') / ||z - z'||^2 over random feasible pairs.

    Args:
        mapping: Mapping with declared mu
        feasible_set: Set the pairs are drawn from
        num_probes: Number of pairs (>= 1)
        rng: Random stream

    Returns:
        MonotonicityReport: passes iff the minimum ratio is >= mu (1 - 1e-9)
    """
    if num_probes < 1:
        raise ConfigError("num_probes must be at least 1")

    min_ratio = math.inf
    for _ in range(num_probes):
        z, z_prime = _distinct_pair(feasible_set, rng)
        diff = z - z_prime
        ratio = float((mapping(z) - mapping(z_prime)) @ diff) / float(diff @ diff)
        min_ratio = min(min_ratio, ratio)

    passed = min_ratio >= mapping.mu * (1 - MONOTONICITY_SLACK)
    logger.debug("monotonicity_probed", min_ratio=min_ratio, mu=mapping.mu, passed=passed)
    return MonotonicityReport(
        min_observed_ratio=min_ratio,
        declared_mu=mapping.mu,
        num_probes=num_probes,
        passed=passed,
    )


def verify_lipschitz(
    mapping: DeterministicMapping,
    feasible_set: FeasibleSet,
    num_probes: int,
    rng: np.random.Generator,
) -> LipschitzReport:
    """Probe ||F(z) - F(z')|| / ||z - z'|| over random feasible pairs."""
    if num_probes < 1:
        raise ConfigError("num_probes must be at least 1")

    max_ratio = 0.0
    for _ in range(num_probes):
        z, z_prime = _distinct_pair(feasible_set, rng)
        ratio = float(np.linalg.norm(mapping(z) - mapping(z_prime))) / float(
            np.linalg.norm(z - z_prime)
        )
        max_ratio = max(max_ratio, ratio)

    return LipschitzReport(
        max_observed_ratio=max_ratio,
        declared_lipschitz=mapping.lipschitz,
        num_probes=num_probes,
        passed=max_ratio <= mapping.lipschitz * (1 + MONOTONICITY_SLACK),
    )


def verify_oracle_contract(
    oracle: StochasticMappingOracle,
    probe_points: Sequence[Vector],
    samples_per_point: int,
    rng: np.random.Generator,
    standard_errors: float | None = None,
) -> OracleContractReport:
    """
    Monte-Carlo check of E||F - F|| <= delta and E||F - F||^2 <= sigma^2.

    Each estimate is compared against its declared bound inflated by
    ``standard_errors`` standard errors (3 by default).

    Raises:
        OracleError: If the oracle carries no deterministic mapping
    """
    if oracle.mapping is None:
        raise OracleError(
            f"{oracle.name}: contract check needs the underlying deterministic mapping"
        )
    if samples_per_point < 100:
        raise ConfigError("samples_per_point must be at least 100")
    if not probe_points:
        raise ConfigError("at least one probe point is required")
    k_se = get_settings().contract_standard_errors if standard_errors is None else standard_errors

    bias_hat: list[float] = []
    var_hat: list[float] = []
    passed = True
    for point in probe_points:
        z = as_point(point, "probe point")
        exact = oracle.mapping(z)
        errors = np.array(
            [np.linalg.norm(oracle.sample(z, rng) - exact) for _ in range(samples_per_point)]
        )
        squared = errors**2
        root_n = math.sqrt(samples_per_point)
        b_hat, b_se = float(errors.mean()), float(errors.std(ddof=1)) / root_n
        v_hat, v_se = float(squared.mean()), float(squared.std(ddof=1)) / root_n
        bias_hat.append(b_hat)
        var_hat.append(v_hat)
        if b_hat > oracle.bias + k_se * b_se or v_hat > oracle.variance + k_se * v_se:
            passed = False

    logger.info(
        "oracle_contract_checked",
        oracle=oracle.name,
        max_bias_hat=max(bias_hat),
        max_var_hat=max(var_hat),
        passed=passed,
    )
    return OracleContractReport(
        max_bias_hat=max(bias_hat),
        max_var_hat=max(var_hat),
        declared_bias=oracle.bias,
        declared_variance=oracle.variance,
        bias_hat=bias_hat,
        var_hat=var_hat,
        passed=passed,
    )


def verify_projection(
    feasible_set: FeasibleSet,
    num_pairs: int,
    rng: np.random.Generator,
    rtol: float = 1e-10,
) -> ProjectionReport:
    """
    Check idempotence, 1-co-coercivity and the diameter bound of a projection.

    Points are drawn around the set (feasible samples plus Gaussian noise of
    the set's diameter) so both interior and exterior inputs are exercised.
    """
    scale = max(feasible_set.diameter, 1.0)
    max_idem = 0.0
    min_gap = math.inf
    max_dist = 0.0
    for _ in range(num_pairs):
        a = feasible_set.sample(rng) + scale * rng.standard_normal(feasible_set.dim)
        b = feasible_set.sample(rng) + scale * rng.standard_normal(feasible_set.dim)
        pa, pb = feasible_set.project(a), feasible_set.project(b)
        max_idem = max(max_idem, float(np.linalg.norm(feasible_set.project(pa) - pa)))
        diff = pa - pb
        gap = float(diff @ (a - b)) - float(diff @ diff)
        min_gap = min(min_gap, gap / max(float(np.linalg.norm(a - b)) ** 2, 1e-300))
        max_dist = max(max_dist, float(np.linalg.norm(diff)))

    passed = (
        max_idem <= rtol * scale
        and min_gap >= -rtol
        and max_dist <= feasible_set.diameter * (1 + rtol)
    )
    return ProjectionReport(
        max_idempotence_error=max_idem,
        min_cocoercivity_gap=min_gap,
        max_pair_distance=max_dist,
        num_pairs=num_pairs,
        passed=passed,
    )


def verify_reference_solution(
    problem: VIProblem,
    num_probes: int,
    rng: np.random.Generator,
    tolerance: float = 1e-8,
) -> ReferenceSolutionReport:
    """Check F(z*)^T (z - z*) >= -tolerance at random feasible z."""
    if problem.reference_solution is None:
        raise ConfigError(f"problem {problem.name} has no reference solution")
    if num_probes < 1:
        raise ConfigError(f"num_probes must be at least 1, got {num_probes}")
    z_star = problem.reference_solution
    f_star = problem.mapping(z_star)
    values = [
        float(f_star @ (problem.feasible_set.sample(rng) - z_star)) for _ in range(num_probes)
    ]
    min_residual = min(values)
    return ReferenceSolutionReport(
        min_residual=min_residual,
        num_probes=num_probes,
        passed=min_residual >= -tolerance,
    )
