"""
Scheme Tests for ExtraPoint.

Tests for:
- Extra-point and extra-momentum update rules
- Condition checkers and parameter choices
- Bound calculators, contraction certificate and potential function
- run_solver sample accounting, determinism and error handling
"""

import math

import numpy as np
import pytest

from extrapoint.core.exceptions import ConfigError, NumericalError, ParameterValidationError
from extrapoint.core.rng import make_rng
from extrapoint.models.params import ExtraMomentumParams, ExtraPointParams
from extrapoint.services.problems import QuadraticVIProblem
from extrapoint.services.schemes import (
    DiminishingSchedule,
    SchemeName,
    SolverState,
    check_extra_momentum_conditions,
    check_extra_point_conditions,
    compute_t_parameters,
    contraction_certificate,
    default_extra_momentum_params,
    default_extra_point_params,
    diminishing_extra_point_params,
    extra_gradient_step,
    extra_momentum_step,
    extra_point_step,
    general_bound_extra_point,
    initial_state,
    momentum_noise_floor,
    ogda_params,
    required_iterations_extra_point,
    run_solver,
    sublinear_bound,
    theoretical_bound_extra_momentum,
    theoretical_bound_extra_point,
)
from extrapoint.services.vi_core import BallSet, StochasticMappingOracle, VIProblem

LONG_RUN = 2000
# Squared distances below this are float roundoff around z*.
ROUNDOFF_DIST_SQ = 1e-30


def _above_roundoff(d: np.ndarray) -> np.ndarray:
    """Prefix of a distance trace before it first reaches the roundoff floor."""
    floor = np.flatnonzero(d <= ROUNDOFF_DIST_SQ)
    return d[: floor[0]] if floor.size else d


def _conditioned_problem(kappa: float, structure: str) -> tuple[QuadraticVIProblem, VIProblem]:
    quadratic = QuadraticVIProblem.generate(4, 1.0, kappa, make_rng(3), structure=structure)
    return quadratic, quadratic.to_vi_problem(radius=100.0)


# ============== Update Rule Tests ==============

class TestUpdateRules:
    """Tests for single iterations against hand-computed updates."""

    def test_extra_point_step_matches_formula(self, exact_problem, quadratic, rng):
        """Test momentum and optimism terms enter as written."""
        params = ExtraPointParams(alpha=0.1, beta=0.2, gamma=0.05, eta=0.1, tau=0.03)
        F = quadratic.mapping()
        z_prev = np.full(4, 0.5)
        z = np.full(4, 1.0)
        f_prev = np.array([0.1, -0.2, 0.3, 0.0])
        state = SolverState(z_prev=z_prev, z_curr=z, f_prev=f_prev, k=3)

        result = extra_point_step(state, params, exact_problem, rng)

        z_half = z + 0.2 * (z - z_prev) - 0.1 * F(z)
        z_next = z - 0.1 * F(z_half) + 0.05 * (z - z_prev) - 0.03 * (F(z) - f_prev)
        np.testing.assert_allclose(result.extra_point, z_half)
        np.testing.assert_allclose(result.state.z_curr, z_next)
        np.testing.assert_array_equal(result.state.z_prev, z)
        np.testing.assert_allclose(result.state.f_prev, F(z))
        assert result.state.k == 4
        assert result.samples_used == 2

    def test_extra_momentum_step_matches_formula(self, exact_problem, quadratic, rng):
        """Test the single-projection update."""
        params = ExtraMomentumParams(alpha=0.1, gamma=0.05, tau=0.08)
        F = quadratic.mapping()
        z_prev, z = np.zeros(4), np.full(4, 1.0)
        f_prev = np.ones(4)
        state = SolverState(z_prev=z_prev, z_curr=z, f_prev=f_prev)

        result = extra_momentum_step(state, params, exact_problem, rng)

        expected = z - 0.1 * F(z) + 0.05 * (z - z_prev) - 0.08 * (F(z) - f_prev)
        np.testing.assert_allclose(result.state.z_curr, expected)
        assert result.extra_point is None
        assert result.samples_used == 1

    def test_extra_gradient_step(self, exact_problem, quadratic, rng):
        """Test the extra-gradient restriction from a fresh start."""
        F = quadratic.mapping()
        state, warmup = initial_state(exact_problem, np.ones(4), rng)

        result = extra_gradient_step(state, 0.05, exact_problem, rng)

        z = np.ones(4)
        half = z - 0.05 * F(z)
        np.testing.assert_allclose(result.state.z_curr, z - 0.05 * F(half))
        assert warmup.samples == 1

    def test_extra_gradient_is_bitwise_extra_point_restriction(self, noisy_problem):
        """Test twenty noisy extra-gradient steps equal extra-point steps with (a, 0, 0, a, 0)."""
        alpha = 0.05
        restriction = ExtraPointParams(alpha=alpha, beta=0.0, gamma=0.0, eta=alpha, tau=0.0)
        eg_rng, ep_rng = make_rng(9), make_rng(9)
        eg_state, _ = initial_state(noisy_problem, np.ones(4), eg_rng)
        ep_state, _ = initial_state(noisy_problem, np.ones(4), ep_rng)

        for _ in range(20):
            eg = extra_gradient_step(eg_state, alpha, noisy_problem, eg_rng)
            ep = extra_point_step(ep_state, restriction, noisy_problem, ep_rng)
            assert np.array_equal(eg.extra_point, ep.extra_point)
            assert np.array_equal(eg.state.z_curr, ep.state.z_curr)
            assert np.array_equal(eg.state.f_prev, ep.state.f_prev)
            eg_state, ep_state = eg.state, ep.state
        assert eg_state.k == 20

    def test_initial_state_projects(self, exact_problem, rng):
        """Test z^-1 = z^0 = P(z0)."""
        radius = exact_problem.feasible_set.radius
        state, _ = initial_state(exact_problem, np.full(4, 10 * radius), rng)

        assert np.linalg.norm(state.z_curr) == pytest.approx(radius)
        np.testing.assert_array_equal(state.z_prev, state.z_curr)

    def test_ogda_params_restriction(self):
        """Test OGDA sets gamma = 0 and tau = alpha."""
        params = ogda_params(0.2)
        assert (params.alpha, params.gamma, params.tau) == (0.2, 0.0, 0.2)


# ============== Condition Checker Tests ==============

class TestExtraPointConditions:
    """Tests for check_extra_point_conditions."""

    @pytest.mark.parametrize("kappa", [1.0, 10.0, 161.0])
    def test_defaults_are_valid(self, kappa):
        """Test the default parameters pass at several condition numbers."""
        params = default_extra_point_params(1.0, kappa)
        verdict = check_extra_point_conditions(params, 1.0, kappa)

        assert verdict.valid
        assert verdict.t.t1 == pytest.approx(1 / (8 * kappa))
        assert verdict.t.t2 == pytest.approx(6 / (64 * kappa))
        assert verdict.t.t3 == pytest.approx(1 / (64 * kappa))

    def test_large_tau_names_violations(self):
        """Test tau x10 at kappa = 1 breaks the two t-inequalities."""
        base = default_extra_point_params(1.0, 1.0)
        params = base.model_copy(update={"tau": base.tau * 10})

        verdict = check_extra_point_conditions(params, 1.0, 1.0)

        assert not verdict.valid
        assert verdict.violated == ["t3 < t1", "t2 < t1 - t3"]

    def test_eta_must_equal_alpha(self):
        """Test eta != alpha is reported."""
        base = default_extra_point_params(1.0, 4.0)
        params = base.model_copy(update={"eta": base.alpha / 2})
        assert "eta = alpha" in check_extra_point_conditions(params, 1.0, 4.0).violated

    def test_step_budget(self):
        """Test an oversized step violates the step budget."""
        params = ExtraPointParams(alpha=1.0, beta=0.0, gamma=0.0, eta=1.0, tau=0.0)
        verdict = check_extra_point_conditions(params, 1.0, 1.0)
        assert "step budget" in verdict.violated
        assert verdict.step_budget == pytest.approx(3.0)

    def test_q_absent_without_gap(self):
        """Test q is None when t1 - t2 - t3 <= 0."""
        params = ExtraPointParams(alpha=0.1, beta=0.0, gamma=0.0, eta=0.1, tau=0.0)
        t = compute_t_parameters(params, 1.0, 1.0)
        assert t.q == pytest.approx(2 / 0.1)
        zero_step = params.model_copy(update={"alpha": 0.0, "eta": 0.0})
        assert compute_t_parameters(zero_step, 1.0, 1.0).q is None

    def test_invalid_constants(self):
        """Test mu <= 0 or L < mu are configuration errors."""
        params = default_extra_point_params(1.0, 2.0)
        with pytest.raises(ConfigError):
            check_extra_point_conditions(params, 0.0, 2.0)
        with pytest.raises(ConfigError):
            check_extra_point_conditions(params, 2.0, 1.0)


class TestExtraMomentumConditions:
    """Tests for check_extra_momentum_conditions."""

    @pytest.mark.parametrize("kappa", [1.0, 10.0, 146.0])
    def test_defaults_are_valid(self, kappa):
        """Test the default parameters pass."""
        params = default_extra_momentum_params(1.0, kappa)
        verdict = check_extra_momentum_conditions(params, 1.0, kappa)

        assert verdict.valid
        assert verdict.threshold == pytest.approx(1 + 0.125 / kappa)

    def test_ogda_fails_ratio(self):
        """Test OGDA (alpha = tau) is not a valid extra-momentum choice."""
        verdict = check_extra_momentum_conditions(ogda_params(0.25), 1.0, 1.0)
        assert "alpha/tau ratio" in verdict.violated

    def test_heavy_momentum_fails_margin(self):
        """Test gamma large enough to break 1 + alpha mu - gamma."""
        base = default_extra_momentum_params(1.0, 4.0)
        params = base.model_copy(update={"gamma": 0.5})
        verdict = check_extra_momentum_conditions(params, 1.0, 4.0)
        assert "monotonicity margin" in verdict.violated
        assert "optimism margin" in verdict.violated

    def test_theta_range(self):
        """Test theta outside (0, 1] is rejected."""
        with pytest.raises(ConfigError):
            default_extra_momentum_params(1.0, 4.0, theta=1.5)


class TestParameterChoices:
    """Tests for default and diminishing parameters."""

    def test_default_extra_point_values(self):
        """Test alpha = 1/(4L), beta = gamma = 1/(64 kappa), tau = 1/(64 L kappa)."""
        params = default_extra_point_params(2.0, 8.0)
        assert params.alpha == pytest.approx(1 / 32)
        assert params.eta == params.alpha
        assert params.beta == params.gamma == pytest.approx(1 / 256)
        assert params.tau == pytest.approx(1 / 2048)

    def test_diminishing_steps_decrease(self):
        """Test alpha_k = 2/((k+2) mu) and momentum shrinks with k."""
        schedule = DiminishingSchedule(1.0, 4.0)
        assert schedule(0).alpha == pytest.approx(1.0)
        assert schedule(8).alpha == pytest.approx(0.2)
        assert schedule(8).gamma < schedule(0).gamma

    def test_diminishing_negative_k(self):
        """Test negative iteration indices are rejected."""
        with pytest.raises(ConfigError):
            diminishing_extra_point_params(-1, 1.0, 2.0)


# ============== Bound Tests ==============

class TestBoundCalculators:
    """Tests for the closed-form bounds."""

    def test_extra_point_bound_at_zero(self):
        """Test the noise-free bound starts at 283/256 d0."""
        assert theoretical_bound_extra_point(0, 2.0, 4.0, 0.0, 0.0, 1.0, 4.0) == pytest.approx(
            2.0 * 283 / 256
        )

    def test_extra_point_bound_floor(self):
        """Test the bound approaches its noise floor."""
        floor = (40 * 0.5 / (63 * 16) + 32 * 0.1 * 3.0 / (63 * 4)) * 256 * 4
        value = theoretical_bound_extra_point(10**6, 1.0, 4.0, math.sqrt(0.5), 0.1, 3.0, 4.0)
        assert value == pytest.approx(floor)

    def test_general_bound_at_zero(self):
        """Test the general bound starts at (2 + a + b)/2 d0 without noise."""
        params = default_extra_point_params(1.0, 4.0)
        t = compute_t_parameters(params, 1.0, 4.0)
        a = (t.t1 - t.t3) / (1 - t.t3)
        b = t.t2 / (1 - t.t3)
        value = general_bound_extra_point(0, 1.0, t, params.alpha, params.tau, 0.0, 0.0, 1.0, 4.0)
        assert value == pytest.approx((2 + a + b) / 2)

    def test_extra_momentum_bound(self):
        """Test 2 (1 + theta/kappa)^-k d0 without noise."""
        value = theoretical_bound_extra_momentum(8, 1.0, 2.0, 0.5, 0.1, 0.1, 0.0, 0.0, 1.0)
        assert value == pytest.approx(2 * 1.25**-8)

    def test_noise_floor(self):
        """Test 128 sigma^2 / (mu (8L + mu)) + 4 delta^2 / mu^2."""
        assert momentum_noise_floor(1.0, 0.5, 1.0, 4.0) == pytest.approx(128 / 33 + 1.0)

    def test_sublinear_bound_decreases(self):
        """Test the O(1/k) bound is decreasing in k."""
        values = [sublinear_bound(k, 1.0, 4.0, 0.5, 2.0, 0.0, 1.0) for k in (0, 10, 100)]
        assert values[0] > values[1] > values[2]

    def test_required_iterations(self):
        """Test ceil(256 kappa ln(283 d0 / (256 eps)))."""
        assert required_iterations_extra_point(2.0, 1.0, 10.0) == 0
        expected = math.ceil(512 * math.log(283 / 256 / 1e-3))
        assert required_iterations_extra_point(2.0, 1.0, 1e-3) == expected


class TestConvergence:
    """Tests that noise-free runs respect their bounds."""

    @pytest.mark.parametrize("structure", ["skew", "symmetric"])
    @pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
    def test_extra_point_bound_dominance(self, kappa, structure):
        """Test d_k stays below the default extra-point bound over 2000 iterations."""
        quadratic, problem = _conditioned_problem(kappa, structure)
        params = default_extra_point_params(quadratic.mu, quadratic.lipschitz)

        trace = run_solver(problem, "extra_point", params, LONG_RUN, 1, seed=1)

        d = _above_roundoff(trace.distances[0])
        for k, d_k in enumerate(d):
            bound = theoretical_bound_extra_point(
                k, d[0], kappa, 0.0, 0.0, problem.diameter, quadratic.lipschitz
            )
            assert d_k <= bound, k

    def test_contraction_certificate(self, quadratic, exact_problem):
        """Test the two-step recursion holds at every iteration."""
        params = default_extra_point_params(quadratic.mu, quadratic.lipschitz)
        t = compute_t_parameters(params, quadratic.mu, quadratic.lipschitz)

        trace = run_solver(exact_problem, "extra_point", params, 200, 1, seed=2)

        slack = contraction_certificate(
            trace.distances[0], t, params.alpha, params.tau, quadratic.lipschitz
        )
        assert slack.shape == (200,)
        assert np.all(slack >= -1e-9 * trace.distances[0, 0])

    @pytest.mark.parametrize("structure", ["skew", "symmetric"])
    @pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
    def test_extra_momentum_bound_dominance(self, kappa, structure):
        """Test d_k <= 2 (1 + theta/kappa)^-k d0 over 2000 iterations."""
        quadratic, problem = _conditioned_problem(kappa, structure)
        params = default_extra_momentum_params(quadratic.mu, quadratic.lipschitz)

        trace = run_solver(problem, "extra_momentum", params, LONG_RUN, 1, seed=3)

        d = _above_roundoff(trace.distances[0])
        ks = np.arange(d.shape[0])
        assert np.all(d <= 2 * (1 + params.theta / kappa) ** (-ks) * d[0] * (1 + 1e-12))

    @pytest.mark.parametrize("structure", ["skew", "symmetric"])
    @pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
    def test_potential_recursion(self, kappa, structure):
        """Test (1 + theta/kappa) V_{k+1} <= V_k and V_k >= d_k / 4 over 2000 iterations."""
        quadratic, problem = _conditioned_problem(kappa, structure)
        params = default_extra_momentum_params(quadratic.mu, quadratic.lipschitz)

        trace = run_solver(problem, "extra_momentum", params, LONG_RUN, 1, seed=4)

        d = _above_roundoff(trace.distances[0])
        v = trace.potential_values[0][: d.shape[0]]
        threshold = 1 + params.theta / kappa
        assert v[0] == pytest.approx(0.5 * d[0])
        assert np.all(threshold * v[1:] <= v[:-1] + 1e-9 * v[0])
        assert np.all(v >= 0.25 * d[: v.shape[0]] - 1e-12)

    def test_noise_floor_plateau(self, rng):
        """Test the noisy extra-momentum plateau over k in [500, 1000] sits below its noise floor."""
        quadratic = QuadraticVIProblem.generate(4, 1.0, 4.0, rng, z_star=np.zeros(4))
        problem = quadratic.to_vi_problem(noise_variance=0.5)
        params = default_extra_momentum_params(1.0, 4.0)

        trace = run_solver(problem, "extra_momentum", params, 1000, 50, seed=5)

        plateau = trace.mean_distances[500:1001]
        stderr = trace.distances[:, 500:1001].mean(axis=1).std(ddof=1) / math.sqrt(50)
        assert plateau.mean() <= momentum_noise_floor(math.sqrt(0.5), 0.0, 1.0, 4.0) + 3 * stderr

    @pytest.mark.slow
    def test_diminishing_schedule_plateau(self, rng):
        """Test (k + 2) E[d_k] stays within twice its value at k = 10."""
        quadratic = QuadraticVIProblem.generate(4, 1.0, 2.0, rng)
        problem = quadratic.to_vi_problem(noise_variance=0.5)

        trace = run_solver(problem, "extra_point", DiminishingSchedule(1.0, 2.0), 1000, 50, seed=6)

        scaled = trace.mean_distances * (np.arange(1001) + 2)
        assert np.all(scaled[10:] <= 2 * scaled[10])


# ============== Solver Driver Tests ==============

class TestRunSolver:
    """Tests for run_solver."""

    def test_zero_iterations(self, exact_problem):
        """Test K = 0 records only z^0 and the warm-up draw."""
        params = default_extra_point_params(1.0, 4.0)

        trace = run_solver(exact_problem, "extra_point", params, 0, 3, seed=0)

        assert trace.iterations == 0
        assert trace.distances.shape == (3, 1)
        assert trace.cumulative_samples.tolist() == [0]
        assert trace.warmup_samples == 1
        assert len(trace.iterates) == 1

    def test_sample_accounting(self, exact_problem):
        """Test extra-point draws two samples per iteration, extra-momentum one."""
        ep = run_solver(
            exact_problem, "extra_point", default_extra_point_params(1.0, 4.0), 5, 1, seed=0
        )
        em = run_solver(
            exact_problem, "extra_momentum", default_extra_momentum_params(1.0, 4.0), 5, 1, seed=0
        )

        assert ep.cumulative_samples.tolist() == [0, 2, 4, 6, 8, 10]
        assert em.cumulative_samples.tolist() == [0, 1, 2, 3, 4, 5]
        assert ep.potential_values is None
        assert em.potential_values.shape == (1, 5)

    def test_threads_do_not_change_results(self, noisy_problem):
        """Test traces are identical for 1 and 4 worker threads."""
        params = default_extra_point_params(1.0, 4.0)

        serial = run_solver(noisy_problem, "extra_point", params, 50, 6, seed=11)
        pooled = run_solver(noisy_problem, "extra_point", params, 50, 6, seed=11, threads=4)

        np.testing.assert_array_equal(serial.distances, pooled.distances)

    def test_replication_streams_are_stable(self, noisy_problem):
        """Test replication 0 does not depend on the replication count."""
        params = default_extra_momentum_params(1.0, 4.0)

        one = run_solver(noisy_problem, "extra_momentum", params, 30, 1, seed=8)
        many = run_solver(noisy_problem, "extra_momentum", params, 30, 5, seed=8)

        np.testing.assert_array_equal(one.distances[0], many.distances[0])
        assert not np.array_equal(many.distances[0], many.distances[1])

    def test_invalid_params_rejected(self, exact_problem):
        """Test failing parameters raise unless overridden."""
        params = ExtraPointParams(alpha=1.0, beta=0.0, gamma=0.0, eta=1.0, tau=0.0)

        with pytest.raises(ParameterValidationError) as exc_info:
            run_solver(exact_problem, "extra_point", params, 5, 1, seed=0)
        assert "step budget" in exc_info.value.violated

        trace = run_solver(
            exact_problem, "extra_point", params, 5, 1, seed=0, override_validation=True
        )
        assert trace.iterations == 5

    def test_baselines_skip_validation(self, exact_problem):
        """Test baselines run with parameters the extra-momentum checker rejects."""
        trace = run_solver(exact_problem, "ogda", ogda_params(1 / 16), 5, 1, seed=0)
        assert trace.method == SchemeName.OGDA.value

    def test_mismatched_params(self, exact_problem):
        """Test extra-momentum parameters cannot drive extra-point."""
        with pytest.raises(ConfigError):
            run_solver(
                exact_problem, "extra_point", default_extra_momentum_params(1.0, 4.0), 5, 1, seed=0
            )

    def test_zeroth_order_needs_evaluator(self, exact_problem):
        """Test zeroth-order methods require an evaluator."""
        with pytest.raises(ConfigError):
            run_solver(
                exact_problem,
                "szo_extra_point",
                default_extra_point_params(1.0, 4.0),
                5,
                1,
                seed=0,
            )

    @pytest.mark.parametrize("iters,reps", [(-1, 1), (5, 0)])
    def test_invalid_sizes(self, exact_problem, iters, reps):
        """Test negative K and R < 1 are rejected."""
        with pytest.raises(ConfigError):
            run_solver(
                exact_problem, "extra_point", default_extra_point_params(1.0, 4.0), iters, reps, seed=0
            )

    def test_non_finite_iterate(self):
        """Test NaN oracle output surfaces with replication and iteration."""
        oracle = StochasticMappingOracle(sample_fn=lambda z, rng: np.full(z.shape, np.nan))
        problem = VIProblem(feasible_set=BallSet(2, 1.0), oracle=oracle, mu=1.0, lipschitz=1.0)

        with pytest.raises(NumericalError) as exc_info:
            run_solver(problem, "extra_point", default_extra_point_params(1.0, 1.0), 3, 1, seed=0)

        assert exc_info.value.replication == 0
        assert "iteration=0" in exc_info.value.message


# ============== Fixture Definitions ==============

@pytest.fixture
def rng():
    """Deterministic random stream."""
    return make_rng(99)


@pytest.fixture
def quadratic():
    """Skew quadratic with mu = 1 and kappa = 4."""
    return QuadraticVIProblem.generate(4, 1.0, 4.0, make_rng(3))


@pytest.fixture
def exact_problem(quadratic):
    """Noise-free VI over a ball large enough that no projection is active."""
    return quadratic.to_vi_problem(radius=100.0)


@pytest.fixture
def noisy_problem(quadratic):
    """Quadratic VI with Gaussian oracle noise."""
    return quadratic.to_vi_problem(noise_variance=0.3)
