"""
Scheme parameter models.

Provides:
- ExtraPointParams: (alpha, beta, gamma, eta, tau) of the extra-point update
- TParameters: derived (t1, t2, t3, q) of the extra-point analysis
- ExtraMomentumParams: (alpha, gamma, tau, theta) of the extra-momentum update
- Verdict models returned by the condition checkers
"""

from pydantic import Field

from extrapoint.models.base import FrozenModel, ReportModel


class ExtraPointParams(FrozenModel):
    """Parameters of the stochastic extra-point update."""

    alpha: float = Field(..., ge=0, description="Step on the extra-point evaluation")
    beta: float = Field(..., ge=0, description="Heavy-ball weight in the extra point")
    gamma: float = Field(..., ge=0, description="Heavy-ball weight in the main update")
    eta: float = Field(..., ge=0, description="Step used to form the extra point")
    tau: float = Field(..., ge=0, description="Optimism weight")


class TParameters(ReportModel):
    """Contraction quantities derived from ExtraPointParams and (mu, L)."""

    t1: float
    t2: float
    t3: float
    q: float | None = Field(
        default=None, description="2(1 - t3)/(t1 - t2 - t3); None when the gap is not positive"
    )


class ExtraPointVerdict(ReportModel):
    """Outcome of check_extra_point_conditions."""

    t: TParameters
    valid: bool
    violated: list[str] = Field(default_factory=list)
    step_budget: float = Field(
        ..., description="2 alpha^2 L^2 + 2|gamma - beta| + 2 gamma + 2 alpha mu - 1"
    )


class ExtraMomentumParams(FrozenModel):
    """Parameters of the stochastic extra-momentum update."""

    alpha: float = Field(..., ge=0, description="Gradient step")
    gamma: float = Field(..., ge=0, description="Heavy-ball weight")
    tau: float = Field(..., ge=0, description="Optimism weight")
    theta: float = Field(default=0.125, gt=0, le=1, description="Contraction constant")


class ExtraMomentumVerdict(ReportModel):
    """Outcome of check_extra_momentum_conditions."""

    valid: bool
    violated: list[str] = Field(default_factory=list)
    threshold: float = Field(..., description="1 + theta/kappa")
    monotonicity_margin: float = Field(..., description="1 + alpha mu - gamma")
    step_ratio: float | None = Field(..., description="alpha/tau (None when tau = 0)")
    optimism_margin: float | None = Field(
        ..., description="1/(8 tau^2 L^2 + 2 gamma) (None when the denominator is 0)"
    )
