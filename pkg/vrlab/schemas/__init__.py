from .report_schema import (
    AssumptionReport,
    BoundCheck,
    BoundReport,
    ComparisonReport,
    HypothesisCheck,
    RefinementRow,
    ResidualReport,
    StabilityReport,
)
from .scenario_schema import ScenarioConfig

__all__ = [
    "AssumptionReport", "BoundCheck", "BoundReport", "ComparisonReport", "HypothesisCheck",
    "RefinementRow", "ResidualReport", "StabilityReport", "ScenarioConfig",
]
