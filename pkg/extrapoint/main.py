"""
ExtraPoint - Command-Line Entry Point

Subcommands:
- solve: run one method on a configured problem, write CSV/SVG/summary
- game-experiment: four-method comparison on a generated matrix game
- check-params: print the condition verdict of scheme parameters
- estimate-oracle: Monte-Carlo bias/variance (and zeroth-order moment) estimates
- gen-problem: write a serialized game instance

Flags override config-file values, which override defaults. Failures print one
line ``error=<kind> exit=<code> message="..."`` on stderr.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import ValidationError

from extrapoint.core.config import get_settings
from extrapoint.core.exceptions import (
    ConfigError,
    ExtraPointError,
    OracleError,
    ParameterValidationError,
)
from extrapoint.core.logging import configure_logging
from extrapoint.core.rng import probe_rng, problem_rng
from extrapoint.models.experiment import (
    ExperimentConfig,
    ProblemKind,
    load_experiment_config,
)
from extrapoint.models.game import NoiseDistribution
from extrapoint.models.params import ExtraMomentumParams, ExtraPointParams
from extrapoint.services.harness import (
    build_evaluator,
    build_problem,
    reduction_factor,
    run_experiment,
    run_game_comparison,
    write_outputs,
)
from extrapoint.services.problems import (
    compute_condition_number,
    generate_game,
    save_game,
)
from extrapoint.services.schemes import (
    SchemeName,
    check_extra_momentum_conditions,
    check_extra_point_conditions,
    default_extra_momentum_params,
    default_extra_point_params,
)
from extrapoint.services.vi_core import verify_oracle_contract
from extrapoint.services.zeroth_order import zeroth_order_draws

logger = structlog.get_logger(__name__)

METHODS = [method.value for method in SchemeName]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.prog}: {message}")


# ============== Argument Parsing ==============


def _run_flags() -> argparse.ArgumentParser:
    flags = _Parser(add_help=False)
    flags.add_argument("--config", type=Path, help="TOML experiment file")
    flags.add_argument("--seed", type=int, help="Master seed (required here or in the config)")
    flags.add_argument("--replications", type=int, help="Replications R")
    flags.add_argument("--iters", type=int, help="Iterations K")
    flags.add_argument("--method", choices=METHODS, help="Solver method")
    flags.add_argument("--out", type=Path, help="Output directory (or file for gen-problem)")
    flags.add_argument("--threads", type=int, help="Worker threads for replications")
    flags.add_argument(
        "--override-validation",
        action="store_true",
        default=None,
        help="Run even when parameters fail their convergence checks",
    )
    flags.add_argument(
        "--log-level", type=str.lower, choices=["debug", "info", "warning", "error"]
    )
    flags.add_argument("--log-json", action="store_true", default=None)
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="extrapoint",
        description="Stochastic extra-point / extra-momentum solvers for strongly monotone VIs.",
    )
    common = _run_flags()
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("solve", parents=[common], help="Run one method on a configured problem")

    game = sub.add_parser(
        "game-experiment", parents=[common], help="Compare the four methods on a matrix game"
    )
    game.add_argument("--noise", choices=[d.value for d in NoiseDistribution])
    game.add_argument(
        "--auto-horizon",
        action="store_true",
        help="Size K from the generated game (see horizon_rule)",
    )

    check = sub.add_parser(
        "check-params", parents=[common], help="Print the condition verdict of parameters"
    )
    check.add_argument("--mu", type=float, default=1.0)
    check.add_argument("--lipschitz", type=float, help="L (defaults to kappa * mu)")
    check.add_argument("--kappa", type=float, default=10.0)
    for name in ("alpha", "beta", "gamma", "eta", "tau"):
        check.add_argument(f"--{name}", type=float)
    check.add_argument("--theta", type=float, default=0.125)

    oracle = sub.add_parser(
        "estimate-oracle", parents=[common], help="Estimate oracle bias and variance"
    )
    oracle.add_argument("--probes", type=int, default=5, help="Probe points")
    oracle.add_argument("--samples", type=int, default=1000, help="Samples per probe point")

    gen = sub.add_parser("gen-problem", parents=[common], help="Write a serialized game")
    gen.add_argument("--n", type=int)
    gen.add_argument("--m", type=int)
    gen.add_argument("--noise", choices=[d.value for d in NoiseDistribution])
    gen.add_argument("--variance", type=float)
    gen.add_argument("--lam", type=float, help="lam_x = lam_y")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with the run flags applied on top."""
    config = load_experiment_config(args.config)
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "replications": args.replications,
        "iterations": args.iters,
        "method": args.method,
        "threads": args.threads,
        "override_validation": args.override_validation,
    }
    return config.with_overrides(**overrides)


def _problem_overrides(config: ExperimentConfig, **values: Any) -> ExperimentConfig:
    values = {key: value for key, value in values.items() if value is not None}
    if not values:
        return config
    return config.with_overrides(problem={**config.problem.model_dump(), **values})


def _out_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    return args.out or config.output.dir or get_settings().output_dir


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, default=str))


# ============== Subcommands ==============


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args)
    config.require_seed()
    result = run_experiment(config)
    out_dir = _out_dir(args, config)
    written = write_outputs(result, out_dir, config.output)
    _emit({"summary": result.summary.model_dump(), "files": [str(p) for p in written]})
    return 0


def cmd_game_experiment(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.config is None:
        config = _problem_overrides(
            config, kind=ProblemKind.GAME_NORMAL.value, n=10, m=20, noise_variance=0.5
        )
    if args.noise is not None:
        kind = ProblemKind.GAME_LOGNORMAL if args.noise == "lognormal" else ProblemKind.GAME_NORMAL
        config = _problem_overrides(config, kind=kind.value)
    config.require_seed()

    results = run_game_comparison(
        config, out_dir=_out_dir(args, config), auto_horizon=args.auto_horizon
    )
    _emit(
        {
            name: {
                **result.summary.model_dump(exclude={"wall_time"}),
                "reduction_factor": reduction_factor(result),
            }
            for name, result in results.items()
        }
    )
    return 0


def cmd_check_params(args: argparse.Namespace) -> int:
    config = load_config(args)
    method = SchemeName(config.method)
    mu = args.mu
    lipschitz = args.lipschitz if args.lipschitz is not None else args.kappa * mu
    explicit = {
        name: getattr(args, name)
        for name in ("alpha", "beta", "gamma", "eta", "tau")
        if getattr(args, name) is not None
    }

    if method.uses_extra_point:
        params = (
            ExtraPointParams(**{"eta": explicit.get("alpha"), **explicit})
            if explicit
            else default_extra_point_params(mu, lipschitz)
        )
        verdict = check_extra_point_conditions(params, mu, lipschitz)
    else:
        params = (
            ExtraMomentumParams(theta=args.theta, **explicit)
            if explicit
            else default_extra_momentum_params(mu, lipschitz, args.theta)
        )
        verdict = check_extra_momentum_conditions(params, mu, lipschitz)

    _emit(
        {
            "method": method.value,
            "mu": mu,
            "lipschitz": lipschitz,
            "kappa": lipschitz / mu,
            "params": params.model_dump(),
            "verdict": verdict.model_dump(),
        }
    )
    if not verdict.valid:
        raise ParameterValidationError(
            f"{method.value} parameters violate: {', '.join(verdict.violated)}",
            violated=verdict.violated,
        )
    return 0


def cmd_estimate_oracle(args: argparse.Namespace) -> int:
    config = load_config(args)
    seed = config.require_seed()
    if args.probes < 1:
        raise ConfigError("--probes must be at least 1")
    bundle = build_problem(config, seed)
    problem = bundle.problem
    rng = probe_rng(seed)
    probes = [problem.feasible_set.sample(rng) for _ in range(args.probes)]

    report = verify_oracle_contract(problem.oracle, probes, args.samples, rng)
    payload: dict[str, Any] = {"problem": problem.name, "first_order": report.model_dump()}

    if bundle.function_oracle is not None:
        zo_config = config.with_overrides(oracle="zeroth_order")
        evaluator = build_evaluator(zo_config, bundle)
        moments = []
        for z in probes:
            draws = zeroth_order_draws(
                bundle.function_oracle, z, evaluator.schedule.smoothing, args.samples, rng
            )
            centered = draws - draws.mean(axis=0)
            moments.append(float(np.mean(np.sum(centered**2, axis=1))))
        payload["zeroth_order"] = {
            "max_second_moment": max(moments),
            "sigma_tilde": evaluator.sigma_tilde,
            "rho_x": evaluator.schedule.rho_x,
            "rho_y": evaluator.schedule.rho_y,
        }

    _emit(payload)
    if not report.passed:
        raise OracleError(f"{problem.oracle.name} exceeds its declared bias or variance")
    return 0


def cmd_gen_problem(args: argparse.Namespace) -> int:
    config = load_config(args)
    seed = config.require_seed()
    spec = config.problem
    noise = args.noise or (
        NoiseDistribution.LOGNORMAL.value
        if spec.kind is ProblemKind.GAME_LOGNORMAL
        else NoiseDistribution.NORMAL.value
    )
    lam = args.lam

    game = generate_game(
        args.n or spec.n,
        args.m or spec.m,
        problem_rng(seed),
        lam_x=lam or spec.lam_x,
        lam_y=lam or spec.lam_y,
        noise_variance=spec.noise_variance if args.variance is None else args.variance,
        distribution=noise,
        seed=seed,
    )
    out = args.out or get_settings().output_dir
    path = out if out.suffix == ".json" else out / "game.json"
    save_game(game, path)
    condition = compute_condition_number(game)
    _emit({"path": str(path), "n": game.n, "m": game.m, **condition._asdict()})
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "game-experiment": cmd_game_experiment,
    "check-params": cmd_check_params,
    "estimate-oracle": cmd_estimate_oracle,
    "gen-problem": cmd_gen_problem,
}


# ============== Entry Point ==============


def _report(error: ExtraPointError) -> None:
    message = error.message.replace('"', "'")
    print(f'error={error.kind} exit={error.exit_code} message="{message}"', file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and return the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        settings = get_settings()
        configure_logging(
            args.log_level or settings.log_level,
            settings.log_json if args.log_json is None else args.log_json,
        )
        return COMMANDS[args.command](args)
    except ExtraPointError as e:
        logger.debug("command_failed", kind=e.kind, exit_code=e.exit_code)
        _report(e)
        return e.exit_code
    except ValidationError as e:
        first = e.errors()[0]
        _report(ConfigError(f"{'.'.join(str(p) for p in first['loc'])}: {first['msg']}"))
        return ConfigError.exit_code
    except OSError as e:
        _report(ConfigError(f"I/O failure: {e}"))
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
