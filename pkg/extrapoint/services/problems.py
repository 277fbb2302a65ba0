"""
Problem Instances for ExtraPoint.

Provides:
- SimplexSet and project_simplex (sort-and-threshold projection)
- QuadraticVIProblem: F(z) = H(z - z*) with analytic solution
- QuadraticSaddleFunction: black-box quadratic saddle with value noise
- MatrixGameProblem: regularized two-player zero-sum game with random payoffs
- condition numbers, reference solves and game (de)serialization
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np
import numpy.typing as npt
import scipy.linalg
import structlog
from pydantic import ValidationError

from extrapoint.core.config import get_settings
from extrapoint.core.exceptions import ConfigError, NumericalError
from extrapoint.models.game import GameInstance, NoiseDistribution
from extrapoint.services.vi_core import (
    BallSet,
    DeterministicMapping,
    FeasibleSet,
    ProductSet,
    StochasticMappingOracle,
    Vector,
    VIProblem,
    as_point,
    deterministic_oracle,
    gaussian_noise_oracle,
    projected_residual,
)
from extrapoint.services.zeroth_order import NoisyFunctionOracle, SmoothingParams

logger = structlog.get_logger(__name__)

PAYOFF_CENTER_RANGE = 30.0
PAYOFF_SPREAD_RANGE = 30.0
LOGNORMAL_SCALE = 10.0


# ============== Probability Simplex ==============


def project_simplex(v: npt.ArrayLike) -> Vector:
    """
    Euclidean projection onto {z >= 0 : sum(z) = 1}.

    Sorts v in decreasing order, finds the largest support size rho with
    u_rho > (sum_{i<=rho} u_i - 1)/rho and thresholds v at that shift.
    """
    v = as_point(v, "v")
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    rho = int(np.nonzero(u * np.arange(1, v.shape[0] + 1) > (cssv - 1.0))[0][-1])
    theta = (cssv[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class SimplexSet(FeasibleSet):
    """Probability simplex of mixed strategies."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ConfigError(f"simplex needs at least two vertices, got dimension {dim}")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0)

    def project(self, z: Vector) -> Vector:
        return project_simplex(z)

    def sample(self, rng: np.random.Generator) -> Vector:
        return rng.dirichlet(np.ones(self._dim))

    def contains(self, z: Vector, atol: float = 1e-10) -> bool:
        return bool(np.all(z >= -atol) and abs(float(z.sum()) - 1.0) <= atol)

    def __repr__(self) -> str:
        return f"<SimplexSet(dim={self._dim})>"


# ============== Quadratic VI ==============


@dataclass(frozen=True, eq=False)
class QuadraticVIProblem:
    """Affine mapping F(z) = H(z - z*) whose symmetric part is >= mu I."""

    operator: npt.NDArray[np.float64]
    z_star: Vector
    mu: float
    lipschitz: float

    @classmethod
    def generate(
        cls,
        dim: int,
        mu: float,
        kappa: float,
        rng: np.random.Generator,
        structure: Literal["skew", "symmetric"] = "skew",
        z_star: npt.ArrayLike | None = None,
    ) -> "QuadraticVIProblem":
        """
        Random instance with exactly the requested mu and L = kappa mu.

        ``skew``: H = mu I + S with S skew-symmetric, scaled so ||H|| = L.
        ``symmetric``: H = U diag(mu..L) U^T with a random orthogonal U.
        """
        if dim < 1:
            raise ConfigError(f"dimension must be positive, got {dim}")
        if not mu > 0 or kappa < 1:
            raise ConfigError(f"need mu > 0 and kappa >= 1, got mu={mu}, kappa={kappa}")
        lipschitz = kappa * mu
        if kappa > 1 and dim == 1:
            raise ConfigError("kappa > 1 needs dimension >= 2")

        if structure == "skew":
            operator = mu * np.eye(dim)
            if kappa > 1:
                b = rng.standard_normal((dim, dim))
                skew = b - b.T
                s_max = float(scipy.linalg.svdvals(skew)[0])
                operator = operator + skew * (mu * math.sqrt(kappa**2 - 1) / s_max)
        elif structure == "symmetric":
            q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            operator = (q * np.linspace(mu, lipschitz, dim)) @ q.T
            operator = (operator + operator.T) / 2
        else:
            raise ConfigError(f"unknown quadratic structure: {structure}")

        solution = (
            rng.standard_normal(dim) if z_star is None else as_point(z_star, "z_star")
        )
        if solution.shape != (dim,):
            raise ConfigError("z_star has the wrong dimension")
        return cls(operator=operator, z_star=solution, mu=mu, lipschitz=lipschitz)

    @property
    def dim(self) -> int:
        return int(self.z_star.shape[0])

    def mapping(self) -> DeterministicMapping:
        h, z_star = self.operator, self.z_star
        return DeterministicMapping(
            evaluate=lambda z: h @ (z - z_star), mu=self.mu, lipschitz=self.lipschitz
        )

    def to_vi_problem(
        self,
        noise_variance: float = 0.0,
        radius: float | None = None,
        offset: npt.ArrayLike | None = None,
    ) -> VIProblem:
        """
        VI over a ball around the origin that contains z* in its interior.

        The default radius is 2 ||z*|| + 10.
        """
        mapping = self.mapping()
        r = 2 * float(np.linalg.norm(self.z_star)) + 10.0 if radius is None else radius
        if np.linalg.norm(self.z_star) >= r:
            raise ConfigError("z* must lie inside the feasible ball")
        oracle = (
            deterministic_oracle(mapping)
            if noise_variance == 0 and offset is None
            else gaussian_noise_oracle(mapping, noise_variance, offset=offset)
        )
        return VIProblem(
            feasible_set=BallSet(self.dim, r),
            oracle=oracle,
            mu=self.mu,
            lipschitz=self.lipschitz,
            reference_solution=self.z_star,
            name="quadratic",
            metadata={"noise_variance": noise_variance},
        )


# ============== Quadratic Saddle (zeroth-order testbed) ==============


class QuadraticSaddleFunction(NoisyFunctionOracle):
    """
    f(x, y, xi) = 1/2 dx^T P dx + dx^T A dy - 1/2 dy^T Q dy
                  + xi_x^T x - xi_y^T y + eps

    with dx = x - x_c, dy = y - y_c. xi_x, xi_y are Gaussian gradient noise of
    total variance ``gradient_noise`` per block, eps is value noise of standard
    deviation ``value_noise``. The saddle point is (x_c, y_c).
    """

    def __init__(
        self,
        coupling: npt.ArrayLike,
        p: npt.ArrayLike | None = None,
        q: npt.ArrayLike | None = None,
        center: npt.ArrayLike | None = None,
        gradient_noise: float = 0.0,
        value_noise: float = 0.0,
        domain_radius: float = 1.0,
    ):
        self.coupling = np.atleast_2d(np.asarray(coupling, dtype=np.float64))
        self.n, self.m = self.coupling.shape
        self.p = np.eye(self.n) if p is None else np.asarray(p, dtype=np.float64)
        self.q = np.eye(self.m) if q is None else np.asarray(q, dtype=np.float64)
        self.center = (
            np.zeros(self.n + self.m) if center is None else as_point(center, "center")
        )
        if self.p.shape != (self.n, self.n) or self.q.shape != (self.m, self.m):
            raise ConfigError("P and Q must match the coupling matrix")
        if self.center.shape != (self.n + self.m,):
            raise ConfigError("center has the wrong dimension")
        if gradient_noise < 0 or value_noise < 0:
            raise ConfigError("noise levels must be nonnegative")

        self.mu = float(
            min(np.linalg.eigvalsh(self.p)[0], np.linalg.eigvalsh(self.q)[0])
        )
        if not self.mu > 0:
            raise ConfigError("P and Q must be positive definite")
        self.gradient_lipschitz = float(scipy.linalg.svdvals(self.hessian)[0])
        self.lipschitz = self.gradient_lipschitz
        self.gradient_noise = float(gradient_noise)
        self.value_noise = float(value_noise)
        self.domain_radius = float(domain_radius)
        self.lipschitz_value = self.gradient_lipschitz * self.domain_radius

    @classmethod
    def random(
        cls,
        n: int,
        m: int,
        kappa: float,
        rng: np.random.Generator,
        mu: float = 1.0,
        **kwargs,
    ) -> "QuadraticSaddleFunction":
        """P = Q = mu I with a random coupling scaled so L / mu = kappa."""
        if kappa < 1:
            raise ConfigError(f"kappa must be >= 1, got {kappa}")
        coupling = np.zeros((n, m))
        if kappa > 1:
            coupling = rng.standard_normal((n, m))
            s_max = float(scipy.linalg.svdvals(coupling)[0])
            coupling *= mu * math.sqrt(kappa**2 - 1) / s_max
        return cls(coupling, p=mu * np.eye(n), q=mu * np.eye(m), **kwargs)

    @property
    def hessian(self) -> npt.NDArray[np.float64]:
        return np.block([[self.p, self.coupling], [self.coupling.T, -self.q]])

    def gradient(self, z: Vector) -> Vector:
        """Analytic (grad_x f; -grad_y f) of the noise-free function."""
        d = z - self.center
        dx, dy = d[: self.n], d[self.n :]
        return np.concatenate(
            [self.p @ dx + self.coupling @ dy, self.q @ dy - self.coupling.T @ dx]
        )

    def draw(self, rng: np.random.Generator, size: int) -> npt.NDArray[np.float64]:
        xi = np.empty((size, self.n + self.m + 1))
        xi[:, : self.n] = rng.standard_normal((size, self.n)) * math.sqrt(
            self.gradient_noise / self.n
        )
        xi[:, self.n : -1] = rng.standard_normal((size, self.m)) * math.sqrt(
            self.gradient_noise / self.m
        )
        xi[:, -1] = rng.standard_normal(size) * self.value_noise
        return xi

    def value(
        self, x: npt.NDArray, y: npt.NDArray, xi: npt.NDArray
    ) -> npt.NDArray[np.float64]:
        dx = x - self.center[: self.n]
        dy = y - self.center[self.n :]
        quad = (
            0.5 * np.einsum("ti,ij,tj->t", dx, self.p, dx)
            + np.einsum("ti,ij,tj->t", dx, self.coupling, dy)
            - 0.5 * np.einsum("ti,ij,tj->t", dy, self.q, dy)
        )
        linear = np.einsum("ti,ti->t", xi[:, : self.n], x) - np.einsum(
            "ti,ti->t", xi[:, self.n : -1], y
        )
        return quad + linear + xi[:, -1]

    def to_vi_problem(self) -> VIProblem:
        """Deterministic VI over the ball of ``domain_radius`` around the saddle point."""
        mapping = DeterministicMapping(
            evaluate=self.gradient, mu=self.mu, lipschitz=self.lipschitz
        )
        return VIProblem(
            feasible_set=BallSet(self.n + self.m, self.domain_radius, center=self.center),
            oracle=deterministic_oracle(mapping),
            mu=self.mu,
            lipschitz=self.lipschitz,
            reference_solution=self.center,
            name="quadratic_saddle",
        )


# ============== Matrix Game ==============


class ConditionNumber(NamedTuple):
    mu: float
    lipschitz: float
    kappa: float


@dataclass(frozen=True, eq=False)
class MatrixGameProblem:
    """
    min_x max_y lam_x/2 ||x||^2 + x^T A_xi y - lam_y/2 ||y||^2 over two simplices.

    ``payoff`` is the generated matrix A0. Normal noise samples A0 + sigma Z;
    log-normal noise samples exp(A0/10 + sigma Z), whose mean is
    exp(A0/10 + sigma^2/2).
    """

    payoff: npt.NDArray[np.float64]
    lam_x: float = 1.0
    lam_y: float = 1.0
    noise_variance: float = 0.0
    distribution: NoiseDistribution = NoiseDistribution.NORMAL
    seed: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.payoff.ndim != 2 or not np.all(np.isfinite(self.payoff)):
            raise ConfigError("payoff must be a finite 2-d matrix")
        if not (self.lam_x > 0 and self.lam_y > 0):
            raise ConfigError("regularization weights must be positive")
        if self.noise_variance < 0:
            raise ConfigError("noise variance must be nonnegative")
        object.__setattr__(self, "distribution", NoiseDistribution(self.distribution))

    @property
    def n(self) -> int:
        return int(self.payoff.shape[0])

    @property
    def m(self) -> int:
        return int(self.payoff.shape[1])

    @property
    def sigma(self) -> float:
        return math.sqrt(self.noise_variance)

    @property
    def mean_payoff(self) -> npt.NDArray[np.float64]:
        if self.distribution is NoiseDistribution.LOGNORMAL:
            return np.exp(self.payoff / LOGNORMAL_SCALE + self.noise_variance / 2)
        return self.payoff

    @property
    def entry_variance(self) -> npt.NDArray[np.float64]:
        """Entrywise variance of A_xi."""
        if self.distribution is NoiseDistribution.LOGNORMAL:
            log_mean = self.payoff / LOGNORMAL_SCALE
            return np.expm1(self.noise_variance) * np.exp(2 * log_mean + self.noise_variance)
        return np.full(self.payoff.shape, self.noise_variance)

    @property
    def feasible_set(self) -> ProductSet:
        return ProductSet([SimplexSet(self.n), SimplexSet(self.m)])

    def jacobian(self) -> npt.NDArray[np.float64]:
        """[[lam_x I, A], [-A^T, lam_y I]] at the mean payoff."""
        a = self.mean_payoff
        return np.block(
            [[self.lam_x * np.eye(self.n), a], [-a.T, self.lam_y * np.eye(self.m)]]
        )

    def mapping_at(self, z: Vector, payoff: npt.NDArray[np.float64]) -> Vector:
        x, y = z[: self.n], z[self.n :]
        return np.concatenate([self.lam_x * x + payoff @ y, self.lam_y * y - payoff.T @ x])

    def value_at(self, x: Vector, y: Vector, payoff: npt.NDArray[np.float64]) -> float:
        return float(
            self.lam_x / 2 * x @ x + x @ payoff @ y - self.lam_y / 2 * y @ y
        )

    @property
    def mu(self) -> float:
        return min(self.lam_x, self.lam_y)

    @property
    def lipschitz(self) -> float:
        if "lipschitz" not in self._cache:
            self._cache["lipschitz"] = compute_condition_number(self).lipschitz
        return self._cache["lipschitz"]

    def deterministic_mapping(self) -> DeterministicMapping:
        mean = self.mean_payoff
        return DeterministicMapping(
            evaluate=lambda z: self.mapping_at(z, mean),
            mu=self.mu,
            lipschitz=self.lipschitz,
        )

    def to_vi_problem(self, reference_solution: Vector | None = None) -> VIProblem:
        """VI over the product of simplices with the first-order payoff oracle."""
        return VIProblem(
            feasible_set=self.feasible_set,
            oracle=game_oracle(self),
            mu=self.mu,
            lipschitz=self.lipschitz,
            reference_solution=reference_solution,
            name=f"game-{self.distribution.value}",
            metadata={"n": self.n, "m": self.m, "noise_variance": self.noise_variance},
        )


def generate_payoff_matrix(n: int, m: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    """
    Block-structured random payoff A0.

    A0 is split into 2x2 blocks of shape (n/2, m/2). Each block draws a center
    a ~ U(-30, 30) and a spread b ~ U(0, 30), then fills its entries i.i.d.
    from U(a - b, a + b).

    Raises:
        ConfigError: If n or m is odd or not positive
    """
    if n < 2 or m < 2 or n % 2 or m % 2:
        raise ConfigError(f"payoff dimensions must be positive and even, got {n}x{m}")
    rows, cols = n // 2, m // 2
    payoff = np.empty((n, m))
    for bi in range(2):
        for bj in range(2):
            a = rng.uniform(-PAYOFF_CENTER_RANGE, PAYOFF_CENTER_RANGE)
            b = rng.uniform(0.0, PAYOFF_SPREAD_RANGE)
            payoff[bi * rows : (bi + 1) * rows, bj * cols : (bj + 1) * cols] = rng.uniform(
                a - b, a + b, size=(rows, cols)
            )
    return payoff


def generate_game(
    n: int,
    m: int,
    rng: np.random.Generator,
    lam_x: float = 1.0,
    lam_y: float = 1.0,
    noise_variance: float = 0.5,
    distribution: NoiseDistribution | str = NoiseDistribution.NORMAL,
    seed: int | None = None,
) -> MatrixGameProblem:
    return MatrixGameProblem(
        payoff=generate_payoff_matrix(n, m, rng),
        lam_x=lam_x,
        lam_y=lam_y,
        noise_variance=noise_variance,
        distribution=NoiseDistribution(distribution),
        seed=seed,
    )


def sample_payoff(
    problem: MatrixGameProblem, rng: np.random.Generator, size: int | None = None
) -> npt.NDArray[np.float64]:
    """One payoff draw A_xi, or ``size`` draws stacked on a leading axis."""
    shape = problem.payoff.shape if size is None else (size, *problem.payoff.shape)
    z = rng.standard_normal(shape)
    if problem.distribution is NoiseDistribution.LOGNORMAL:
        return np.exp(problem.payoff / LOGNORMAL_SCALE + problem.sigma * z)
    return problem.payoff + problem.sigma * z


def game_value_oracle(
    problem: MatrixGameProblem, x: Vector, y: Vector, rng: np.random.Generator
) -> float:
    """Noisy game value with one fresh payoff draw."""
    return problem.value_at(x, y, sample_payoff(problem, rng))


def game_mapping_oracle(
    problem: MatrixGameProblem, z: Vector, rng: np.random.Generator
) -> Vector:
    """(lam_x x + A_xi y; lam_y y - A_xi^T x) with one fresh payoff draw."""
    return problem.mapping_at(z, sample_payoff(problem, rng))


def game_noise_bounds(problem: MatrixGameProblem) -> tuple[float, float]:
    """
    Bounds on E||A_xi y - A y||^2 and E||A_xi^T x - A^T x||^2 over the simplices.

    With v the entrywise variance these are max_j sum_i v_ij and max_i sum_j v_ij.
    """
    v = problem.entry_variance
    return float(v.sum(axis=0).max()), float(v.sum(axis=1).max())


def game_oracle(problem: MatrixGameProblem) -> StochasticMappingOracle:
    """First-order payoff oracle with its declared variance (sum of both block bounds)."""
    x_block, y_block = game_noise_bounds(problem)
    variance = x_block + y_block
    return StochasticMappingOracle(
        sample_fn=lambda z, rng: game_mapping_oracle(problem, z, rng),
        bias=math.sqrt(variance),
        variance=variance,
        mapping=problem.deterministic_mapping(),
        systematic_bias=0.0,
        name=f"payoff-{problem.distribution.value}",
    )


def game_lipschitz_value(problem: MatrixGameProblem) -> float:
    """
    M = max over simplex vertices (e_i, e_j) of ||grad_x f|| and ||grad_y f||.

    Both gradients are affine in (x, y), so their norms peak at vertices.
    """
    a = problem.mean_payoff
    col_sq = (a**2).sum(axis=0)[None, :]
    row_sq = (a**2).sum(axis=1)[:, None]
    grad_x = problem.lam_x**2 + 2 * problem.lam_x * a + col_sq
    grad_y = row_sq - 2 * problem.lam_y * a + problem.lam_y**2
    return math.sqrt(float(max(grad_x.max(), grad_y.max())))


def compute_condition_number(problem: MatrixGameProblem) -> ConditionNumber:
    """
    Extreme singular values of the game Jacobian and their ratio.

    Raises:
        NumericalError: If the SVD does not converge
    """
    try:
        singular = scipy.linalg.svdvals(problem.jacobian())
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"singular value computation failed: {e}") from e
    mu, lipschitz = float(singular[-1]), float(singular[0])
    return ConditionNumber(mu=mu, lipschitz=lipschitz, kappa=lipschitz / mu)


class GameValueOracle(NoisyFunctionOracle):
    """Zeroth-order view of a matrix game: one payoff draw per xi."""

    def __init__(self, problem: MatrixGameProblem):
        self.problem = problem
        self.n, self.m = problem.n, problem.m
        self.lipschitz_value = game_lipschitz_value(problem)
        self.gradient_noise = max(game_noise_bounds(problem))
        self.gradient_lipschitz = problem.lipschitz

    def draw(self, rng: np.random.Generator, size: int) -> npt.NDArray[np.float64]:
        return sample_payoff(self.problem, rng, size)

    def value(
        self, x: npt.NDArray, y: npt.NDArray, xi: npt.NDArray
    ) -> npt.NDArray[np.float64]:
        p = self.problem
        return (
            p.lam_x / 2 * np.einsum("ti,ti->t", x, x)
            + np.einsum("ti,tij,tj->t", x, xi, y)
            - p.lam_y / 2 * np.einsum("tj,tj->t", y, y)
        )

    def differences(
        self,
        x: Vector,
        y: Vector,
        u: npt.NDArray,
        v: npt.NDArray,
        params: SmoothingParams,
        rng: np.random.Generator,
    ) -> tuple[npt.NDArray, npt.NDArray]:
        """
        Value differences sampled without forming the payoff draws.

        With A_xi = A0 + sigma Z, the differences of one draw are affine in
        (u^T Z y, x^T Z v), a centered Gaussian pair with variances
        ||u||^2 ||y||^2 and ||x||^2 ||v||^2 and covariance (u.x)(v.y). Sampling
        that pair directly has the same joint law as the three-evaluation path
        and avoids cancellation at tiny radii. Log-normal games use the
        generic path.
        """
        p = self.problem
        if p.distribution is not NoiseDistribution.NORMAL:
            return super().differences(x, y, u, v, params, rng)
        rho_x, rho_y = params.rho_x, params.rho_y
        uu = np.einsum("ti,ti->t", u, u)
        vv = np.einsum("tj,tj->t", v, v)
        ux = u @ x
        vy = v @ y

        diff_x = rho_x * (p.lam_x * ux + u @ (p.payoff @ y)) + p.lam_x / 2 * rho_x**2 * uu
        diff_y = rho_y * (v @ (p.payoff.T @ x) - p.lam_y * vy) - p.lam_y / 2 * rho_y**2 * vv
        if p.sigma > 0:
            g = rng.standard_normal((u.shape[0], 2))
            scale = np.sqrt(uu * (y @ y))
            cov = ux * vy
            loading = np.divide(cov, scale, out=np.zeros_like(cov), where=scale > 0)
            residual = np.sqrt(np.maximum(vv * (x @ x) - loading**2, 0.0))
            diff_x = diff_x + rho_x * p.sigma * scale * g[:, 0]
            diff_y = diff_y + rho_y * p.sigma * (loading * g[:, 0] + residual * g[:, 1])
        return diff_x, diff_y


# ============== Reference Solutions ==============


def solve_reference(
    problem: VIProblem,
    tolerance: float | None = None,
    max_iters: int | None = None,
    z0: npt.ArrayLike | None = None,
) -> Vector:
    """
    Deterministic extra-gradient (step 1/(2L)) until the projected residual <= tolerance.

    Args:
        problem: VI with a known deterministic mapping
        tolerance: Residual tolerance (settings default 1e-10)
        max_iters: Iteration cap (settings default)
        z0: Starting point (defaults to the projection of the origin)

    Raises:
        ConfigError: If tolerance is not positive
        NumericalError: If the cap is reached; carries the last residual
    """
    settings = get_settings()
    tol = settings.reference_tolerance if tolerance is None else tolerance
    cap = settings.reference_max_iters if max_iters is None else max_iters
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")

    mapping = problem.mapping
    step = 0.5 / problem.lipschitz
    z = problem.project(as_point(np.zeros(problem.dim) if z0 is None else z0, "z0"))
    residual = projected_residual(problem, z)
    for iteration in range(cap):
        if residual <= tol:
            logger.info(
                "reference_solved", problem=problem.name, iterations=iteration, residual=residual
            )
            return z
        z_half = problem.project(z - step * mapping(z))
        z = problem.project(z - step * mapping(z_half))
        if not np.all(np.isfinite(z)):
            raise NumericalError("reference solve diverged", iteration=iteration)
        residual = projected_residual(problem, z)

    if residual <= tol:
        return z
    raise NumericalError(
        f"reference solve did not reach tolerance {tol:g} in {cap} iterations "
        f"(residual={residual:.3e})"
    )


def game_vi_problem(problem: MatrixGameProblem, tolerance: float | None = None) -> VIProblem:
    """Game VI carrying the reference solution of its mean-payoff problem."""
    vi = problem.to_vi_problem()
    return vi.with_reference(solve_reference(vi, tolerance))


# ============== Serialization ==============


def save_game(problem: MatrixGameProblem, path: Path | str) -> Path:
    """Write a game instance as JSON with round-trip float precision."""
    instance = GameInstance(
        n=problem.n,
        m=problem.m,
        lam_x=problem.lam_x,
        lam_y=problem.lam_y,
        noise_variance=problem.noise_variance,
        distribution=problem.distribution,
        payoff=problem.payoff.tolist(),
        seed=problem.seed,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(instance.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("game_saved", path=str(path), n=problem.n, m=problem.m)
    return path


def load_game(path: Path | str) -> MatrixGameProblem:
    """
    Read a game instance written by save_game.

    Raises:
        ConfigError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        instance = GameInstance.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"game file not found: {path}") from e
    except ValidationError as e:
        raise ConfigError(f"invalid game file {path}: {e.error_count()} error(s)") from e
    return MatrixGameProblem(
        payoff=np.array(instance.payoff, dtype=np.float64),
        lam_x=instance.lam_x,
        lam_y=instance.lam_y,
        noise_variance=instance.noise_variance,
        distribution=instance.distribution,
        seed=instance.seed,
    )
