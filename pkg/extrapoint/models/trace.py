"""
Solver trace models.

Provides:
- SolverTrace: per-replication distances, potentials and sample counters of a run
- TraceRecord: one exported CSV row (iteration k)
- RunSummary: headline numbers of an experiment run
"""

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from pydantic import Field

from extrapoint.models.base import ReportModel


@dataclass
class SolverTrace:
    """
    Output of run_solver.

    Arrays indexed by iteration have K+1 entries (k = 0..K) except
    ``potential_values``, which has K entries: V_k needs the evaluation at z^k
    that only iteration k draws.
    """

    method: str
    iterates: list[npt.NDArray[np.float64]]
    distances: npt.NDArray[np.float64] | None
    step_lengths: npt.NDArray[np.float64]
    cumulative_samples: npt.NDArray[np.int64]
    function_evaluations: npt.NDArray[np.int64]
    wall_time: npt.NDArray[np.float64]
    potential_values: npt.NDArray[np.float64] | None = None
    warmup_samples: int = 0
    final_iterates: list[npt.NDArray[np.float64]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if np.any(np.diff(self.cumulative_samples) < 0):
            raise ValueError("cumulative_samples must be nondecreasing")
        if self.distances is not None and self.distances.shape[1] != len(self.cumulative_samples):
            raise ValueError("distances must have one column per iterate")

    @property
    def replications(self) -> int:
        return int(self.step_lengths.shape[0])

    @property
    def iterations(self) -> int:
        """Number of completed iterations K."""
        return int(self.step_lengths.shape[1]) - 1

    @property
    def mean_distances(self) -> npt.NDArray[np.float64] | None:
        """E[d_k] across replications."""
        if self.distances is None:
            return None
        return self.distances.mean(axis=0)

    @property
    def mean_potentials(self) -> npt.NDArray[np.float64] | None:
        if self.potential_values is None:
            return None
        return self.potential_values.mean(axis=0)


class TraceRecord(ReportModel):
    """One CSV row: aggregated state after k iterations."""

    k: int = Field(..., ge=0)
    mean_dist_sq: float | None = None
    bound: float | None = None
    cum_samples: int = Field(..., ge=0)
    func_evals: int = Field(default=0, ge=0)
    mean_step_sq: float = 0.0
    mean_potential: float | None = None
    wall_time: float | None = None
    dist_sq: list[float] = Field(default_factory=list)


class RunSummary(ReportModel):
    """Headline numbers of one experiment run."""

    method: str
    problem: str
    kappa: float
    mu: float
    lipschitz: float
    iterations: int
    replications: int
    initial_dist_sq: float | None
    final_mean_dist_sq: float | None
    total_samples: int
    warmup_samples: int
    function_evaluations: int
    closed_form_samples: float | None = None
    schedule_samples: int | None = None
    wall_time: float
