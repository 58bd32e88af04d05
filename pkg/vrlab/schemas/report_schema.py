"""Pydantic schemas for the machine-readable theorem reports."""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class AssumptionReport(BaseModel):
    """Finite-search verdicts on the coefficient assumptions and the estimated constant Gamma."""
    gamma_estimate: float = Field(..., description="max of the ratio part and sup |f(t,0,0)|")
    gamma_ratio: float
    gamma_drift: float
    gamma_declared: Optional[float] = None
    stopping_family: str = "deterministic"
    monotonicity_ok: bool
    slope_band_ok: bool
    lipschitz_ok: bool
    boundary_bound_ok: bool
    boundary_sup: float
    probe_count: int
    witnesses: Dict[str, List[float]] = Field(default_factory=dict)

    @property
    def gamma(self) -> float:
        """Declared Gamma when given, the estimate otherwise."""
        return self.gamma_estimate if self.gamma_declared is None else self.gamma_declared

    @property
    def ok(self) -> bool:
        return self.monotonicity_ok and self.slope_band_ok and self.lipschitz_ok and self.boundary_bound_ok


class ResidualReport(BaseModel):
    """Reconstruction residual of the stochastic representation."""
    max_residual: float
    per_time: List[float]
    excluded_nodes: int
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tolerance


class BoundCheck(BaseModel):
    name: str
    measured: float
    bound: float
    slack: float
    tolerance: float = 0.0

    @property
    def ok(self) -> bool:
        return self.slack >= -self.tolerance


class BoundReport(BaseModel):
    """A priori estimates: measured side against the closed-form right-hand side."""
    gamma_estimate: float
    checks: List[BoundCheck] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


class HypothesisCheck(BaseModel):
    ok: bool
    worst: float = Field(..., description="largest violation found (<= 0 when the hypothesis holds)")
    witness: List[float] = Field(default_factory=list)


class ComparisonReport(BaseModel):
    """Comparison of two VRBDSDEs: hypotheses, stopping-time diagnostics, A- and Y-order."""
    hypothesis_checks: Dict[str, HypothesisCheck]
    epsilon: float
    mu_histogram: Dict[int, int]
    tau_histogram: Dict[int, int]
    mu_before_horizon: float
    a_order_ok: bool
    y_order_ok: Optional[bool] = None
    max_violation: float
    y_max_violation: Optional[float] = None
    failed_hypotheses: List[str] = Field(default_factory=list)
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.a_order_ok and self.y_order_ok is not False


class StabilityReport(BaseModel):
    """One perturbed boundary X^n against the reference X^0."""
    label: str
    family: str = "deterministic"
    m_gap: float
    xi_gap: float
    y_gap: float
    a_gap: float
    stability_constant: float
    bound_rhs: float
    bound_ok: bool
    a_bound_rhs: float
    a_bound_ok: bool
    assumptions_ok: bool = True


class RefinementRow(BaseModel):
    steps: int
    dt: float
    y0: float
    a_sup: float
    iterations: int
    flat_off_residual: float
