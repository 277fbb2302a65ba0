"""
Harness Tests for ExtraPoint.

Tests for:
- Experiment configuration loading and overrides
- Problem, parameter and evaluator setup
- Replicated runs, bound columns and summaries
- CSV export/import and SVG plots
- The matrix-game comparison
"""

import math
import re
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from extrapoint.core.exceptions import ConfigError, ParameterValidationError
from extrapoint.models.experiment import ExperimentConfig, load_experiment_config
from extrapoint.models.trace import TraceRecord
from extrapoint.services.harness import (
    BASE_FIELDS,
    build_evaluator,
    build_problem,
    contraction_horizon,
    emit_plot,
    export_csv,
    game_horizon,
    read_csv,
    reduction_factor,
    resolve_params,
    run_experiment,
    run_game_comparison,
    write_outputs,
)
from extrapoint.services.problems import compute_condition_number
from extrapoint.services.schemes import DiminishingSchedule, theoretical_bound_extra_point
from extrapoint.services.zeroth_order import ScheduleVariant

CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"
SVG = "{http://www.w3.org/2000/svg}"


def _screen_y(svg_path: Path, gid: str) -> list[float]:
    root = ET.parse(svg_path).getroot()
    group = next(el for el in root.iter() if el.get("id") == gid)
    path = next(el for el in group.iter(f"{SVG}path"))
    numbers = [float(v) for v in re.findall(r"-?\d+(?:\.\d+)?(?:e-?\d+)?", path.get("d"))]
    return numbers[1::2]


# ============== Configuration Tests ==============

class TestExperimentConfig:
    """Tests for ExperimentConfig and TOML loading."""

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.toml")))
    def test_shipped_configs_load(self, name):
        """Test every bundled experiment file validates."""
        assert load_experiment_config(CONFIG_DIR / name).iterations >= 1

    def test_defaults_without_file(self):
        """Test no file means documented defaults."""
        config = load_experiment_config(None)
        assert (config.method, config.iterations, config.replications) == ("extra_point", 1000, 1)
        assert config.seed is None

    def test_unknown_key_rejected(self, tmp_path):
        """Test unknown keys fail validation."""
        path = tmp_path / "bad.toml"
        path.write_text('method = "extra_point"\nspeed = 3\n')
        with pytest.raises(ConfigError, match="speed"):
            load_experiment_config(path)

    def test_malformed_toml(self, tmp_path):
        """Test TOML syntax errors are configuration errors."""
        path = tmp_path / "bad.toml"
        path.write_text("method = \n")
        with pytest.raises(ConfigError, match="malformed"):
            load_experiment_config(path)

    def test_missing_file(self, tmp_path):
        """Test a missing config file is reported."""
        with pytest.raises(ConfigError, match="not found"):
            load_experiment_config(tmp_path / "absent.toml")

    def test_overrides(self):
        """Test None overrides are ignored and others replace file values."""
        config = ExperimentConfig(seed=3, iterations=10)
        updated = config.with_overrides(seed=None, iterations=20, method="ogda")

        assert (updated.seed, updated.iterations, updated.method) == (3, 20, "ogda")
        with pytest.raises(ConfigError, match="replications"):
            config.with_overrides(replications=0)

    def test_missing_seed(self):
        """Test runs need a seed."""
        with pytest.raises(ConfigError, match="seed"):
            ExperimentConfig().require_seed()

    def test_zeroth_order_needs_black_box(self):
        """Test zeroth-order runs on synthetic VIs are rejected."""
        with pytest.raises(ValidationError):
            ExperimentConfig(method="szo_extra_point")

    def test_diminishing_needs_extra_point(self):
        """Test diminishing parameters are limited to the extra-point family."""
        with pytest.raises(ValidationError):
            ExperimentConfig(method="extra_momentum", params_source="diminishing")

    def test_batch_scale_needs_linear_schedule(self):
        """Test a batch scale is only accepted with the linear schedule."""
        with pytest.raises(ValidationError, match="linear"):
            ExperimentConfig(zeroth_order={"schedule": "extra_point", "batch_scale": 2.0})
        config = ExperimentConfig(zeroth_order={"schedule": "linear", "batch_scale": 2.0})
        assert config.zeroth_order.batch_scale == 2.0


# ============== Setup Tests ==============

class TestSetup:
    """Tests for build_problem, resolve_params and build_evaluator."""

    def test_synthetic_problem_is_reproducible(self, synthetic_config):
        """Test the same seed builds the same instance."""
        a = build_problem(synthetic_config, 5).problem
        b = build_problem(synthetic_config, 5).problem

        np.testing.assert_array_equal(a.reference_solution, b.reference_solution)
        assert a.kappa == pytest.approx(4.0)

    def test_saddle_problem(self, saddle_config):
        """Test the saddle kind carries a unit-norm center and a function oracle."""
        bundle = build_problem(saddle_config, 5)

        assert bundle.function_oracle is not None
        assert np.linalg.norm(bundle.problem.reference_solution) == pytest.approx(1.0)
        assert bundle.problem.oracle.variance == pytest.approx(2 * 0.01)

    def test_default_and_baseline_params(self, synthetic_config):
        """Test baselines default to step 1/(4L)."""
        problem = build_problem(synthetic_config, 1).problem
        eg = resolve_params(synthetic_config.with_overrides(method="extra_gradient"), problem)

        assert eg.alpha == eg.eta == pytest.approx(1 / (4 * problem.lipschitz))
        assert eg.beta == eg.gamma == eg.tau == 0.0

    def test_diminishing_params(self, synthetic_config):
        """Test the diminishing source yields a schedule."""
        config = synthetic_config.with_overrides(params_source="diminishing")
        params = resolve_params(config, build_problem(config, 1).problem)
        assert isinstance(params, DiminishingSchedule)

    def test_explicit_params_missing(self, synthetic_config):
        """Test explicit runs name the missing values."""
        config = synthetic_config.with_overrides(
            params_source="explicit", explicit={"alpha": 0.01}
        )
        with pytest.raises(ConfigError, match="beta, gamma, tau"):
            resolve_params(config, build_problem(config, 1).problem)

    def test_evaluator_schedule(self, saddle_config):
        """Test the auto schedule follows the method family."""
        bundle = build_problem(saddle_config, 1)
        evaluator = build_evaluator(saddle_config, bundle)

        assert evaluator.schedule.variant is ScheduleVariant.EXTRA_POINT
        assert evaluator.schedule.horizon == saddle_config.iterations
        momentum = saddle_config.with_overrides(method="szo_extra_momentum")
        assert build_evaluator(momentum, bundle).schedule.variant is ScheduleVariant.EXTRA_MOMENTUM

    def test_evaluator_batch_scale(self, saddle_config):
        """Test the configured batch scale reaches the linear schedule."""
        config = saddle_config.with_overrides(
            zeroth_order={"schedule": "linear", "batch_scale": 2.5}
        )
        schedule = build_evaluator(config, build_problem(config, 1)).schedule

        assert [schedule.batch_size(k) for k in (-1, 0, 1, 4)] == [1, 1, 3, 10]

    def test_first_order_has_no_evaluator(self, synthetic_config):
        """Test first-order runs sample the oracle directly."""
        assert build_evaluator(synthetic_config, build_problem(synthetic_config, 1)) is None


# ============== Run Tests ==============

class TestRunExperiment:
    """Tests for run_experiment and its records."""

    def test_records_and_bound(self, synthetic_config):
        """Test one row per k with E[d_k] below the default extra-point bound."""
        result = run_experiment(synthetic_config)
        problem = build_problem(synthetic_config, synthetic_config.seed).problem

        assert [r.k for r in result.records] == list(range(51))
        d0 = result.records[0].mean_dist_sq
        for record in result.records:
            expected = theoretical_bound_extra_point(
                record.k, d0, problem.kappa, 0.0, 0.0, problem.diameter, problem.lipschitz
            )
            assert record.bound == pytest.approx(expected)
            assert record.mean_dist_sq <= record.bound
        assert result.records[-1].cum_samples == 100

    def test_zero_iterations(self, synthetic_config):
        """Test K = 0 yields a single row."""
        result = run_experiment(synthetic_config.with_overrides(iterations=0))

        assert len(result.records) == 1
        assert result.records[0].cum_samples == 0
        assert result.summary.warmup_samples == 1

    def test_momentum_potentials(self, synthetic_config):
        """Test extra-momentum rows carry V_k except at k = K."""
        result = run_experiment(synthetic_config.with_overrides(method="extra_momentum"))

        assert result.records[0].mean_potential == pytest.approx(0.5 * result.records[0].mean_dist_sq)
        assert result.records[-1].mean_potential is None

    def test_baseline_has_no_bound(self, synthetic_config):
        """Test baselines report no bound."""
        result = run_experiment(synthetic_config.with_overrides(method="ogda"))
        assert all(record.bound is None for record in result.records)

    def test_invalid_explicit_params(self, synthetic_config):
        """Test failing explicit parameters stop the run unless overridden."""
        config = synthetic_config.with_overrides(
            params_source="explicit",
            explicit={"alpha": 1.0, "beta": 0.0, "gamma": 0.0, "tau": 0.0},
        )
        with pytest.raises(ParameterValidationError):
            run_experiment(config)

        result = run_experiment(config.with_overrides(override_validation=True, iterations=3))
        assert all(record.bound is None for record in result.records)

    def test_zeroth_order_sample_totals(self, saddle_config):
        """Test the run draws exactly the schedule total."""
        result = run_experiment(saddle_config)
        summary = result.summary
        horizon = saddle_config.iterations

        assert summary.total_samples == summary.schedule_samples
        assert summary.closed_form_samples <= summary.total_samples < summary.closed_form_samples + 2 * horizon
        assert summary.function_evaluations == 3 * summary.total_samples
        assert all(record.bound is None for record in result.records)

    def test_threads_do_not_change_output(self, synthetic_config, tmp_path):
        """Test CSV bytes are identical for 1 and 3 threads."""
        config = synthetic_config.with_overrides(
            problem={**synthetic_config.problem.model_dump(), "noise_variance": 0.2},
            replications=4,
        )
        serial = export_csv(run_experiment(config).records, tmp_path / "serial.csv")
        pooled = export_csv(
            run_experiment(config.with_overrides(threads=3)).records, tmp_path / "pooled.csv"
        )
        assert serial.read_bytes() == pooled.read_bytes()

    def test_reduction_factor(self, synthetic_config):
        """Test d_0 / E[d_K] exceeds one after convergence."""
        assert reduction_factor(run_experiment(synthetic_config)) > 1.0


# ============== Output Tests ==============

class TestCsv:
    """Tests for export_csv and read_csv."""

    def test_roundtrip(self, synthetic_config, tmp_path):
        """Test rows read back identically, replication columns included."""
        config = synthetic_config.with_overrides(
            replications=2, output={"per_replication": True, "wall_clock": True}
        )
        records = run_experiment(config).records

        path = export_csv(records, tmp_path / "trace.csv")

        assert read_csv(path) == records

    def test_layout(self, tmp_path):
        """Test header order, empty cells and LF line endings."""
        records = [
            TraceRecord(k=0, mean_dist_sq=1.5, cum_samples=0),
            TraceRecord(k=1, mean_dist_sq=0.1, cum_samples=2, func_evals=2, mean_step_sq=0.25),
        ]

        raw = export_csv(records, tmp_path / "out.csv").read_bytes()

        lines = raw.decode().split("\n")
        assert lines[0] == ",".join(BASE_FIELDS)
        assert lines[1] == "0,1.5,,0,0,0.0,"
        assert b"\r" not in raw
        assert raw.endswith(b"\n")

    def test_empty_trace(self, tmp_path):
        """Test exporting nothing is an error."""
        with pytest.raises(ConfigError):
            export_csv([], tmp_path / "empty.csv")


class TestPlots:
    """Tests for emit_plot."""

    def test_lines_are_identified_and_monotone(self, tmp_path):
        """Test each series is a gid-tagged path drawn downwards on screen."""
        fast = [TraceRecord(k=k, mean_dist_sq=0.5**k, cum_samples=k) for k in range(12)]
        slow = [TraceRecord(k=k, mean_dist_sq=0.9**k, cum_samples=k) for k in range(12)]

        path = emit_plot({"fast": fast, "slow": slow}, tmp_path / "plot.svg")

        for name in ("fast", "slow"):
            ys = _screen_y(path, f"trace-{name}")
            assert len(ys) == 12
            assert all(a < b for a, b in zip(ys, ys[1:]))

    def test_output_is_deterministic(self, tmp_path):
        """Test two renders of the same data are byte-identical."""
        records = [TraceRecord(k=k, mean_dist_sq=1.0 / (k + 1), cum_samples=k) for k in range(5)]

        first = emit_plot({"a": records}, tmp_path / "one.svg").read_bytes()
        second = emit_plot({"a": records}, tmp_path / "two.svg").read_bytes()

        assert first == second

    def test_empty_series(self, tmp_path):
        """Test empty input is rejected."""
        with pytest.raises(ConfigError):
            emit_plot({}, tmp_path / "none.svg")
        with pytest.raises(ConfigError):
            emit_plot({"a": []}, tmp_path / "none.svg")

    def test_write_outputs(self, synthetic_config, tmp_path):
        """Test CSV, SVG and summary files of one run."""
        result = run_experiment(synthetic_config)

        written = write_outputs(result, tmp_path, synthetic_config.output)

        assert sorted(p.name for p in written) == [
            "extra_point-summary.json",
            "extra_point.csv",
            "extra_point.svg",
        ]


# ============== Game Comparison Tests ==============

class TestGameComparison:
    """Tests for run_game_comparison."""

    @pytest.mark.integration
    def test_four_methods_share_the_instance(self, game_config, tmp_path):
        """Test every method runs on the same game and writes its outputs."""
        results = run_game_comparison(game_config, out_dir=tmp_path)

        assert list(results) == ["szo_extra_point", "szo_extra_momentum", "extra_gradient", "ogda"]
        initial = {result.summary.initial_dist_sq for result in results.values()}
        assert len(initial) == 1
        for name in results:
            assert (tmp_path / f"{name}.csv").exists()
            assert (tmp_path / f"{name}-summary.json").exists()
            assert _screen_y(tmp_path / "comparison.svg", f"trace-{name}")

    def test_auto_horizon(self, game_config):
        """Test the figure rule sets K = ceil(kappa ln 1e4) of the generated game."""
        config = game_config.with_overrides(replications=1)
        bundle = build_problem(config, config.seed)

        results = run_game_comparison(config, methods=["ogda"], bundle=bundle, auto_horizon=True)

        kappa = compute_condition_number(bundle.game).kappa
        assert results["ogda"].summary.iterations == game_horizon(kappa)
        assert kappa <= bundle.problem.kappa * (1 + 1e-12)

    def test_needs_game_problem(self, synthetic_config):
        """Test synthetic problems cannot drive the comparison."""
        with pytest.raises(ConfigError):
            run_game_comparison(synthetic_config)

    def test_game_horizon(self):
        """Test the horizon of the published condition numbers."""
        assert game_horizon(161.2) == 1485
        assert game_horizon(146.0) == math.ceil(146.0 * math.log(1e4))
        with pytest.raises(ConfigError):
            game_horizon(0.5)

    @pytest.mark.parametrize("kappa", [1.0, 12.5, 186.4])
    def test_contraction_horizon_is_smallest(self, kappa):
        """Test K is the first iteration whose contraction reaches 1e-3."""
        rate = 1 - 1 / (2 * kappa)
        horizon = contraction_horizon(kappa)

        assert rate**horizon <= 1e-3 < rate ** (horizon - 1)
        assert contraction_horizon(1.0) == 10
        with pytest.raises(ConfigError):
            contraction_horizon(2.0, reduction=1.0)

    def test_contraction_rule_uses_vi_constant(self, game_config):
        """Test the contraction rule sizes K from L/mu of the game VI."""
        config = game_config.with_overrides(replications=1, horizon_rule="contraction")
        bundle = build_problem(config, config.seed)

        results = run_game_comparison(config, methods=["ogda"], bundle=bundle, auto_horizon=True)

        assert results["ogda"].summary.iterations == contraction_horizon(bundle.problem.kappa)

    @pytest.mark.slow
    def test_normal_game_reaches_hundredfold_reduction(self):
        """Test every method cuts E[d] by 10^2 on the shipped 10x20 normal game."""
        config = load_experiment_config(CONFIG_DIR / "game_normal.toml").with_overrides(seed=3)

        results = run_game_comparison(config, auto_horizon=True)

        for name, result in results.items():
            assert reduction_factor(result) >= 100, name
        baseline = results["extra_gradient"].summary.final_mean_dist_sq
        for name in ("szo_extra_point", "szo_extra_momentum"):
            ratio = results[name].summary.final_mean_dist_sq / baseline
            assert 1 / 5 <= ratio <= 5, name


# ============== Fixture Definitions ==============

@pytest.fixture
def synthetic_config():
    """Noise-free extra-point run on a small quadratic VI."""
    return ExperimentConfig(
        method="extra_point",
        iterations=50,
        replications=1,
        seed=9,
        problem={"kind": "synthetic", "dim": 4, "kappa": 4.0},
    )


@pytest.fixture
def saddle_config():
    """Zeroth-order extra-point run on a small black-box saddle."""
    return ExperimentConfig(
        method="szo_extra_point",
        iterations=6,
        replications=2,
        seed=4,
        problem={"kind": "saddle", "n": 2, "m": 3, "kappa": 2.0, "noise_variance": 0.01},
    )


@pytest.fixture
def game_config():
    """Short zeroth-order comparison on a 4x6 normal-noise game."""
    return ExperimentConfig(
        iterations=4,
        replications=2,
        seed=21,
        oracle="zeroth_order",
        problem={"kind": "game-normal", "n": 4, "m": 6, "noise_variance": 0.5},
        zeroth_order={"schedule": "linear"},
    )
