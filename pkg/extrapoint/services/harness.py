"""
Experiment Harness for ExtraPoint.

Handles:
- building problems, parameters and evaluators from an ExperimentConfig
- replicated runs with the matching theoretical-bound column
- CSV export/import of trace rows and SVG convergence plots
- the four-method game comparison
"""

import csv
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import matplotlib
import numpy as np
import numpy.typing as npt
import structlog

from extrapoint.core.config import get_settings
from extrapoint.core.exceptions import ConfigError
from extrapoint.core.rng import problem_rng
from extrapoint.models.experiment import (
    ExperimentConfig,
    OutputSpec,
    ParamsSource,
    ProblemKind,
)
from extrapoint.models.game import NoiseDistribution
from extrapoint.models.params import ExtraMomentumParams, ExtraPointParams
from extrapoint.models.trace import RunSummary, SolverTrace, TraceRecord
from extrapoint.services.problems import (
    GameValueOracle,
    MatrixGameProblem,
    QuadraticSaddleFunction,
    QuadraticVIProblem,
    compute_condition_number,
    game_vi_problem,
    generate_game,
    load_game,
)
from extrapoint.services.schemes import (
    DiminishingSchedule,
    ParamsLike,
    SchemeName,
    check_extra_momentum_conditions,
    check_extra_point_conditions,
    default_extra_momentum_params,
    default_extra_point_params,
    extra_gradient_params,
    general_bound_extra_point,
    ogda_params,
    run_solver,
    sublinear_bound,
    theoretical_bound_extra_momentum,
    theoretical_bound_extra_point,
)
from extrapoint.services.vi_core import VIProblem, gaussian_noise_oracle
from extrapoint.services.zeroth_order import (
    NoisyFunctionOracle,
    ScheduleVariant,
    ZerothOrderMappingOracle,
    closed_form_total_samples,
    make_schedule,
)

logger = structlog.get_logger(__name__)

# Reduction of the noise-free part targeted by contraction_horizon.
CONTRACTION_REDUCTION = 1e3

BASE_FIELDS = [
    "k",
    "mean_dist_sq",
    "bound",
    "cum_samples",
    "func_evals",
    "mean_step_sq",
    "mean_potential",
]
INT_FIELDS = {"k", "cum_samples", "func_evals"}
COMPARISON_METHODS = (
    SchemeName.SZO_EXTRA_POINT,
    SchemeName.SZO_EXTRA_MOMENTUM,
    SchemeName.EXTRA_GRADIENT,
    SchemeName.OGDA,
)
SADDLE_CENTER_NORM = 1.0
SADDLE_DEFAULT_RADIUS = 2.0


# ============== Problem and Parameter Setup ==============


@dataclass
class ProblemBundle:
    """A VI problem with its reference solution and optional black-box view."""

    problem: VIProblem
    function_oracle: NoisyFunctionOracle | None = None
    game: MatrixGameProblem | None = None


class ExperimentResult(NamedTuple):
    records: list[TraceRecord]
    summary: RunSummary
    trace: SolverTrace


def build_problem(config: ExperimentConfig, seed: int) -> ProblemBundle:
    """
    Generate (or load) the configured problem from the problem stream of ``seed``.

    Game problems carry the reference solution of their mean-payoff VI.
    """
    spec = config.problem
    rng = problem_rng(seed)

    if spec.kind is ProblemKind.SYNTHETIC:
        quadratic = QuadraticVIProblem.generate(
            spec.dim, spec.mu, spec.kappa, rng, structure=spec.structure
        )
        return ProblemBundle(quadratic.to_vi_problem(spec.noise_variance, radius=spec.radius))

    if spec.kind is ProblemKind.SADDLE:
        center = rng.standard_normal(spec.n + spec.m)
        center *= SADDLE_CENTER_NORM / np.linalg.norm(center)
        saddle = QuadraticSaddleFunction.random(
            spec.n,
            spec.m,
            spec.kappa,
            rng,
            mu=spec.mu,
            center=center,
            gradient_noise=spec.noise_variance,
            value_noise=spec.value_noise,
            domain_radius=spec.radius or SADDLE_DEFAULT_RADIUS,
        )
        problem = saddle.to_vi_problem()
        if spec.noise_variance > 0:
            # first-order view: both gradient blocks carry noise of the given variance
            problem = problem.with_oracle(
                gaussian_noise_oracle(problem.mapping, 2 * spec.noise_variance)
            )
        return ProblemBundle(problem, function_oracle=saddle)

    if spec.game_file is not None:
        game = load_game(spec.game_file)
    else:
        distribution = (
            NoiseDistribution.LOGNORMAL
            if spec.kind is ProblemKind.GAME_LOGNORMAL
            else NoiseDistribution.NORMAL
        )
        game = generate_game(
            spec.n,
            spec.m,
            rng,
            lam_x=spec.lam_x,
            lam_y=spec.lam_y,
            noise_variance=spec.noise_variance,
            distribution=distribution,
            seed=seed,
        )
    return ProblemBundle(game_vi_problem(game), function_oracle=GameValueOracle(game), game=game)


def resolve_params(config: ExperimentConfig, problem: VIProblem) -> ParamsLike:
    """
    Scheme parameters for the configured method and parameter source.

    Baselines use ``explicit.step_size`` (default 1/(4L)) and ignore the source.
    """
    method = SchemeName(config.method)
    explicit = config.explicit
    mu, lipschitz = problem.mu, problem.lipschitz

    if method is SchemeName.EXTRA_GRADIENT:
        return extra_gradient_params(explicit.step_size or 1 / (4 * lipschitz))
    if method is SchemeName.OGDA:
        return ogda_params(explicit.step_size or 1 / (4 * lipschitz), explicit.theta)

    if config.params_source is ParamsSource.DIMINISHING:
        return DiminishingSchedule(mu, lipschitz)

    if config.params_source is ParamsSource.DEFAULT:
        if method.uses_extra_point:
            return default_extra_point_params(mu, lipschitz)
        return default_extra_momentum_params(mu, lipschitz, explicit.theta)

    if method.uses_extra_point:
        missing = [
            name
            for name in ("alpha", "beta", "gamma", "tau")
            if getattr(explicit, name) is None
        ]
        if missing:
            raise ConfigError(f"explicit extra-point parameters missing: {', '.join(missing)}")
        return ExtraPointParams(
            alpha=explicit.alpha,
            beta=explicit.beta,
            gamma=explicit.gamma,
            eta=explicit.alpha if explicit.eta is None else explicit.eta,
            tau=explicit.tau,
        )
    missing = [name for name in ("alpha", "gamma", "tau") if getattr(explicit, name) is None]
    if missing:
        raise ConfigError(f"explicit extra-momentum parameters missing: {', '.join(missing)}")
    return ExtraMomentumParams(
        alpha=explicit.alpha, gamma=explicit.gamma, tau=explicit.tau, theta=explicit.theta
    )


def schedule_variant(config: ExperimentConfig) -> ScheduleVariant:
    """Configured schedule, or the one matching the method family."""
    if config.zeroth_order.schedule != "auto":
        return ScheduleVariant(config.zeroth_order.schedule)
    if SchemeName(config.method).uses_extra_point:
        return ScheduleVariant.EXTRA_POINT
    return ScheduleVariant.EXTRA_MOMENTUM


def build_evaluator(
    config: ExperimentConfig, bundle: ProblemBundle
) -> ZerothOrderMappingOracle | None:
    if not config.uses_zeroth_order:
        return None
    oracle = bundle.function_oracle
    if oracle is None:
        raise ConfigError(f"{bundle.problem.name} has no function oracle for zeroth-order runs")
    schedule = make_schedule(
        schedule_variant(config),
        max(config.iterations, 1),
        bundle.problem.kappa,
        oracle.n,
        oracle.m,
        rho=config.zeroth_order.rho,
        batch_scale=config.zeroth_order.batch_scale,
    )
    return ZerothOrderMappingOracle(oracle, schedule)


# ============== Bounds ==============


def bound_column(
    method: SchemeName,
    params: ParamsLike,
    problem: VIProblem,
    d0: float,
    iterations: int,
) -> npt.NDArray[np.float64] | None:
    """
    Theoretical bound on E[d_k] for k = 0..K, or None when no bound applies.

    Uses the oracle's sigma, its systematic bias and the set diameter of the run.
    Baselines and parameters failing their checks get no bound.
    """
    if method.is_baseline:
        return None
    sigma, delta = problem.oracle.sigma, problem.oracle.systematic_bias
    kappa, lipschitz, mu = problem.kappa, problem.lipschitz, problem.mu
    diameter = problem.diameter
    ks = range(iterations + 1)

    if isinstance(params, DiminishingSchedule):
        values = [sublinear_bound(k, d0, kappa, sigma, diameter, delta, mu) for k in ks]
    elif isinstance(params, ExtraPointParams):
        if params == default_extra_point_params(mu, lipschitz):
            values = [
                theoretical_bound_extra_point(k, d0, kappa, sigma, delta, diameter, lipschitz)
                for k in ks
            ]
        else:
            verdict = check_extra_point_conditions(params, mu, lipschitz)
            if not verdict.valid:
                return None
            values = [
                general_bound_extra_point(
                    k, d0, verdict.t, params.alpha, params.tau, sigma, delta, diameter, lipschitz
                )
                for k in ks
            ]
    else:
        if not check_extra_momentum_conditions(params, mu, lipschitz).valid:
            return None
        values = [
            theoretical_bound_extra_momentum(
                k, d0, kappa, params.theta, params.tau, params.alpha, sigma, delta, mu
            )
            for k in ks
        ]
    return np.asarray(values)


# ============== Runs ==============


def build_records(
    trace: SolverTrace,
    bounds: npt.ArrayLike | None = None,
    include_wall_clock: bool = False,
    per_replication: bool = False,
) -> list[TraceRecord]:
    """One TraceRecord per iterate k = 0..K, aggregated across replications."""
    mean_dist = trace.mean_distances
    mean_pot = trace.mean_potentials
    mean_step = trace.step_lengths.mean(axis=0)
    bound_values = None if bounds is None else np.asarray(bounds, dtype=np.float64)

    records = []
    for k in range(trace.iterations + 1):
        records.append(
            TraceRecord(
                k=k,
                mean_dist_sq=None if mean_dist is None else float(mean_dist[k]),
                bound=None if bound_values is None else float(bound_values[k]),
                cum_samples=int(trace.cumulative_samples[k]),
                func_evals=int(trace.function_evaluations[k]),
                mean_step_sq=float(mean_step[k]),
                mean_potential=None
                if mean_pot is None or k >= len(mean_pot)
                else float(mean_pot[k]),
                wall_time=float(trace.wall_time[k]) if include_wall_clock else None,
                dist_sq=[float(d) for d in trace.distances[:, k]]
                if per_replication and trace.distances is not None
                else [],
            )
        )
    return records


def run_experiment(
    config: ExperimentConfig, bundle: ProblemBundle | None = None
) -> ExperimentResult:
    """
    Run a configured experiment end to end.

    The problem (with its reference solution), parameters and evaluator are
    derived from the config, R replications run under the master seed and
    E[d_k] is reported next to the matching bound.

    Args:
        config: Validated experiment configuration (must carry a seed)
        bundle: Pre-built problem, reused across methods of a comparison

    Raises:
        ConfigError: Missing seed or inconsistent settings
        ParameterValidationError: Explicit parameters fail their checks
        NumericalError: A replication diverged (message names the replication)
    """
    seed = config.require_seed()
    method = SchemeName(config.method)
    bundle = bundle or build_problem(config, seed)
    problem = bundle.problem
    params = resolve_params(config, problem)
    evaluator = build_evaluator(config, bundle)
    threads = config.threads or get_settings().threads

    trace = run_solver(
        problem,
        method,
        params,
        config.iterations,
        config.replications,
        seed,
        evaluator=evaluator,
        override_validation=config.override_validation,
        threads=threads,
    )

    mean_dist = trace.mean_distances
    d0 = None if mean_dist is None else float(mean_dist[0])
    bounds = (
        None
        if d0 is None or evaluator is not None
        else bound_column(method, params, problem, d0, config.iterations)
    )
    records = build_records(
        trace,
        bounds,
        include_wall_clock=config.output.wall_clock,
        per_replication=config.output.per_replication,
    )

    closed_form = schedule_total = None
    if evaluator is not None:
        schedule = evaluator.schedule
        per_iteration = 2 if method.uses_extra_point else 1
        schedule_total = schedule.total_samples(per_iteration)
        if schedule.variant is not ScheduleVariant.LINEAR:
            closed_form = closed_form_total_samples(
                schedule.variant, schedule.horizon, schedule.kappa
            )

    summary = RunSummary(
        method=method.value,
        problem=problem.name,
        kappa=problem.kappa,
        mu=problem.mu,
        lipschitz=problem.lipschitz,
        iterations=config.iterations,
        replications=config.replications,
        initial_dist_sq=d0,
        final_mean_dist_sq=None if mean_dist is None else float(mean_dist[-1]),
        total_samples=int(trace.cumulative_samples[-1]),
        warmup_samples=trace.warmup_samples,
        function_evaluations=int(trace.function_evaluations[-1]),
        closed_form_samples=closed_form,
        schedule_samples=schedule_total,
        wall_time=float(trace.wall_time[-1]),
    )
    logger.info(
        "experiment_finished",
        method=summary.method,
        problem=summary.problem,
        kappa=summary.kappa,
        final_mean_dist_sq=summary.final_mean_dist_sq,
        total_samples=summary.total_samples,
    )
    return ExperimentResult(records, summary, trace)


# ============== CSV ==============


def _format(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def export_csv(records: Sequence[TraceRecord], path: Path | str) -> Path:
    """
    Write trace rows as CSV: header, one LF-terminated line per k.

    Floats use shortest round-trip repr. ``wall_time`` and per-replication
    ``dist_sq_<r>`` columns appear only when the records carry them.

    Raises:
        ConfigError: If ``records`` is empty
    """
    if not records:
        raise ConfigError("cannot export an empty trace")
    fieldnames = list(BASE_FIELDS)
    if any(record.wall_time is not None for record in records):
        fieldnames.append("wall_time")
    replications = max(len(record.dist_sq) for record in records)
    fieldnames.extend(f"dist_sq_{r}" for r in range(replications))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for record in sorted(records, key=lambda r: r.k):
            row = {name: _format(getattr(record, name)) for name in BASE_FIELDS}
            if "wall_time" in fieldnames:
                row["wall_time"] = _format(record.wall_time)
            for r, value in enumerate(record.dist_sq):
                row[f"dist_sq_{r}"] = _format(value)
            writer.writerow(row)
    logger.info("csv_written", path=str(path), rows=len(records))
    return path


def read_csv(path: Path | str) -> list[TraceRecord]:
    """Parse a CSV written by export_csv back into TraceRecords."""
    records = []
    with Path(path).open(encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            values: dict = {}
            for name in BASE_FIELDS + ["wall_time"]:
                raw = row.get(name, "")
                if raw == "":
                    continue
                values[name] = int(raw) if name in INT_FIELDS else float(raw)
            replication_columns = sorted(
                (name for name in row if name.startswith("dist_sq_")),
                key=lambda name: int(name.rsplit("_", 1)[1]),
            )
            values["dist_sq"] = [float(row[name]) for name in replication_columns if row[name]]
            records.append(TraceRecord(**values))
    return records


# ============== Plots ==============


def _plotted_values(records: Sequence[TraceRecord]) -> tuple[list[int], list[float]]:
    use_distance = all(record.mean_dist_sq is not None for record in records)
    ks = [record.k for record in records]
    ys = [record.mean_dist_sq if use_distance else record.mean_step_sq for record in records]
    return ks, ys


def emit_plot(
    series: Mapping[str, Sequence[TraceRecord]],
    path: Path | str,
    log_scale_y: bool = True,
    labels: Mapping[str, str] | None = None,
    title: str | None = None,
) -> Path:
    """
    Write a standalone SVG of E[d_k] against k, one line per series.

    Each line carries the SVG id ``trace-<name>``. Series without distances
    fall back to the mean squared step length.

    Raises:
        ConfigError: If there is no series or a series is empty
    """
    if not series:
        raise ConfigError("nothing to plot")
    for name, records in series.items():
        if not records:
            raise ConfigError(f"series {name!r} is empty")
    labels = labels or {}

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(
        {"svg.hashsalt": "extrapoint", "path.simplify": False, "font.family": "DejaVu Sans"}
    ):
        fig, ax = plt.subplots(figsize=(6.4, 4.0), constrained_layout=True)
        for name, records in series.items():
            ks, ys = _plotted_values(records)
            (line,) = ax.plot(ks, ys, label=labels.get(name, name), linewidth=1.2)
            line.set_gid(f"trace-{name}")
        if log_scale_y:
            ax.set_yscale("log", nonpositive="mask")
        ax.set_xlabel("iteration k")
        ax.set_ylabel("E[d_k]")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("plot_written", path=str(path), series=len(series))
    return path


def write_outputs(
    result: ExperimentResult, out_dir: Path, output: OutputSpec, stem: str | None = None
) -> list[Path]:
    """CSV, SVG and JSON summary of one run, as enabled by ``output``."""
    stem = stem or result.summary.method
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if output.csv:
        written.append(export_csv(result.records, out_dir / f"{stem}.csv"))
    if output.svg:
        written.append(
            emit_plot({stem: result.records}, out_dir / f"{stem}.svg", output.log_scale)
        )
    summary_path = out_dir / f"{stem}-summary.json"
    summary_path.write_text(result.summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    written.append(summary_path)
    return written


# ============== Game Comparison ==============


def run_game_comparison(
    config: ExperimentConfig,
    out_dir: Path | None = None,
    methods: Sequence[SchemeName | str] = COMPARISON_METHODS,
    bundle: ProblemBundle | None = None,
    auto_horizon: bool = False,
) -> dict[str, ExperimentResult]:
    """
    Run every comparison method on one generated game with zeroth-order oracles.

    All methods share the problem instance, its reference solution and the
    master seed. With ``out_dir`` each method gets its CSV and summary, and a
    combined ``comparison.svg`` is written. ``auto_horizon`` replaces the
    configured K by comparison_horizon, following ``config.horizon_rule``.
    """
    seed = config.require_seed()
    if not config.problem.kind.is_game:
        raise ConfigError("the game comparison needs a game-normal or game-lognormal problem")
    bundle = bundle or build_problem(config, seed)
    kappa = (
        compute_condition_number(bundle.game).kappa
        if bundle.game is not None
        else bundle.problem.kappa
    )
    if auto_horizon:
        config = config.with_overrides(iterations=comparison_horizon(config, bundle))
    logger.info(
        "game_comparison_started",
        problem=bundle.problem.name,
        kappa=kappa,
        iterations=config.iterations,
        methods=[SchemeName(m).value for m in methods],
    )

    results: dict[str, ExperimentResult] = {}
    for method in methods:
        name = SchemeName(method).value
        method_config = config.with_overrides(method=name, oracle="zeroth_order")
        results[name] = run_experiment(method_config, bundle=bundle)

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, result in results.items():
            write_outputs(
                result, out_dir, config.output.model_copy(update={"svg": False}), stem=name
            )
        if config.output.svg:
            emit_plot(
                {name: result.records for name, result in results.items()},
                out_dir / "comparison.svg",
                config.output.log_scale,
                title=f"{bundle.problem.name}, kappa = {kappa:.1f}",
            )
    return results


def reduction_factor(result: ExperimentResult) -> float:
    """d_0 / E[d_K] of a run with a reference solution."""
    summary = result.summary
    if summary.initial_dist_sq is None or summary.final_mean_dist_sq is None:
        raise ConfigError("run has no reference solution")
    if summary.final_mean_dist_sq == 0:
        return math.inf
    return summary.initial_dist_sq / summary.final_mean_dist_sq


def game_horizon(kappa: float, reduction: float = 1e4) -> int:
    """K = ceil(kappa ln(reduction)), the horizon used for the game figures."""
    if kappa < 1 or reduction <= 1:
        raise ConfigError("need kappa >= 1 and reduction > 1")
    return math.ceil(kappa * math.log(reduction))


def contraction_horizon(kappa: float, reduction: float = CONTRACTION_REDUCTION) -> int:
    """
    Smallest K with (1 - 1/(2 kappa))^K <= 1/reduction.

    1 - 1/(2 kappa) is the per-iteration contraction of E||z - z*||^2 under
    steps of size 1/(4L) on a mu-strongly monotone mapping with kappa = L/mu,
    so K is about 2 kappa ln(reduction).
    """
    if kappa < 1 or reduction <= 1:
        raise ConfigError("need kappa >= 1 and reduction > 1")
    return math.ceil(math.log(reduction) / -math.log1p(-1 / (2 * kappa)))


def comparison_horizon(config: ExperimentConfig, bundle: ProblemBundle) -> int:
    """
    Horizon of an auto-sized game comparison.

    ``figure`` uses game_horizon on the singular-value ratio of the Jacobian;
    ``contraction`` uses contraction_horizon on the VI constant L/mu.
    """
    if config.horizon_rule == "contraction":
        return contraction_horizon(bundle.problem.kappa)
    kappa = (
        compute_condition_number(bundle.game).kappa
        if bundle.game is not None
        else bundle.problem.kappa
    )
    return game_horizon(kappa)
