"""
ExtraPoint Models Package

Pydantic models shared by the solvers, the harness and the CLI.
"""

from extrapoint.models.base import FrozenModel, ReportModel
from extrapoint.models.experiment import (
    ExperimentConfig,
    ExplicitParams,
    OutputSpec,
    ParamsSource,
    ProblemKind,
    ProblemSpec,
    ZerothOrderSpec,
    load_experiment_config,
)
from extrapoint.models.game import GameInstance, NoiseDistribution
from extrapoint.models.params import (
    ExtraMomentumParams,
    ExtraMomentumVerdict,
    ExtraPointParams,
    ExtraPointVerdict,
    TParameters,
)
from extrapoint.models.trace import RunSummary, SolverTrace, TraceRecord

__all__ = [
    # Base
    "FrozenModel",
    "ReportModel",
    # Scheme parameters
    "ExtraPointParams",
    "ExtraPointVerdict",
    "ExtraMomentumParams",
    "ExtraMomentumVerdict",
    "TParameters",
    # Traces
    "SolverTrace",
    "TraceRecord",
    "RunSummary",
    # Experiments
    "ExperimentConfig",
    "ProblemSpec",
    "ProblemKind",
    "ParamsSource",
    "ExplicitParams",
    "ZerothOrderSpec",
    "OutputSpec",
    "load_experiment_config",
    # Games
    "GameInstance",
    "NoiseDistribution",
]
