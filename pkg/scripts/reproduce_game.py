#!/usr/bin/env python3
"""
Game Comparison Reproduction Script
Runs the four-method comparison on a normal-noise and a log-normal-noise game
(same payoff draw) with the horizon sized per instance by each config's
horizon_rule, and writes CSV/SVG/summary files under one output directory
per noise model.
"""

import argparse
import sys
from pathlib import Path

import structlog

from extrapoint.core.config import get_settings
from extrapoint.core.exceptions import ExtraPointError
from extrapoint.core.logging import configure_logging
from extrapoint.models.experiment import load_experiment_config
from extrapoint.services.harness import reduction_factor, run_game_comparison

logger = structlog.get_logger(__name__)

CONFIGS = {
    "normal": Path("config/game_normal.toml"),
    "lognormal": Path("config/game_lognormal.toml"),
}


def main() -> int:
    parser = argparse.ArgumentParser(description="Reproduce the matrix-game comparison")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--replications", type=int, default=10)
    parser.add_argument("--out", type=Path, default=Path("out/game"))
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--only", choices=sorted(CONFIGS), default=None)
    args = parser.parse_args()

    settings = get_settings()
    configure_logging(settings.log_level, settings.log_json)

    for noise, path in CONFIGS.items():
        if args.only and noise != args.only:
            continue
        config = load_experiment_config(path).with_overrides(
            seed=args.seed, replications=args.replications, threads=args.threads
        )
        try:
            results = run_game_comparison(config, out_dir=args.out / noise, auto_horizon=True)
        except ExtraPointError as e:
            logger.error("reproduction_failed", noise=noise, error=e.message)
            return e.exit_code

        for name, result in results.items():
            logger.info(
                "method_result",
                noise=noise,
                method=name,
                iterations=result.summary.iterations,
                final_mean_dist_sq=result.summary.final_mean_dist_sq,
                reduction=reduction_factor(result),
                samples=result.summary.total_samples,
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
