"""Pydantic schemas for scenario configuration files."""
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from vrlab.exceptions import ConfigError

Experiment = Literal["solve", "represent", "skorohod", "compare", "stability", "validate", "bounds"]


def _finite_params(v: Dict[str, float]) -> Dict[str, float]:
    for key, value in v.items():
        if not math.isfinite(value):
            raise ValueError(f"parameter '{key}' must be finite")
    return v


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(..., gt=0, description="Horizon")
    N: int = Field(..., ge=1, description="Number of time steps")

    @field_validator("T")
    @classmethod
    def validate_horizon(cls, v):
        if not math.isfinite(v):
            raise ValueError("grid.T must be finite")
        return v


class DriftConfig(BaseModel):
    """f(t, y, l) preset; declared constants override the preset defaults."""
    model_config = ConfigDict(extra="forbid")

    preset: str = "linear"
    params: Dict[str, float] = Field(default_factory=dict)
    lipschitz_y: Optional[float] = Field(None, ge=0)
    lower_slope: Optional[float] = Field(None, gt=0)
    upper_slope: Optional[float] = Field(None, gt=0)

    @field_validator("params")
    @classmethod
    def validate_params(cls, v):
        return _finite_params(v)


class DiffusionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = "affine_g"
    params: Dict[str, float] = Field(default_factory=dict)
    lipschitz_y: Optional[float] = Field(None, ge=0)

    @field_validator("params")
    @classmethod
    def validate_params(cls, v):
        return _finite_params(v)


class CoefficientsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    drift: DriftConfig = Field(default_factory=DriftConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    gamma: Optional[float] = Field(None, ge=0, description="Declared ratio-bound constant; estimated when absent")


class BoundaryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: str = "ramp"
    params: Dict[str, float] = Field(default_factory=dict)

    @field_validator("params")
    @classmethod
    def validate_params(cls, v):
        return _finite_params(v)


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tol_fp: Optional[float] = Field(None, gt=0)
    tol_l: Optional[float] = Field(None, gt=0)
    max_iter: Optional[int] = Field(None, ge=1)
    strict: bool = True
    y0_policy: Literal["boundary", "zero"] = "boundary"
    bracket: Optional[Tuple[float, float]] = None

    @field_validator("bracket")
    @classmethod
    def validate_bracket(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("solver.bracket must satisfy l_lo < l_hi")
        return v


class ProblemConfig(BaseModel):
    """The second problem of a comparison; omitted parts repeat the first."""
    model_config = ConfigDict(extra="forbid")

    coefficients: Optional[CoefficientsConfig] = None
    boundary: Optional[BoundaryConfig] = None


class ComparisonConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    second: ProblemConfig = Field(default_factory=ProblemConfig)
    epsilon: Optional[float] = Field(None, gt=0)


class StabilityConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["shift", "slope"] = "shift"
    ns: List[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_length=1)

    @field_validator("ns")
    @classmethod
    def validate_ns(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("stability.ns entries must be >= 1")
        return v


class BoundsConfig(BaseModel):
    """Constant frozen inputs y and y' for the a priori estimates."""
    model_config = ConfigDict(extra="forbid")

    y: float = 0.0
    y_prime: float = 0.1
    perturbation: Optional[float] = Field(None, description="Constant obstacle shift for the index-process stability check")


class ScenarioConfig(BaseModel):
    """One reproducible run."""
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "examples": [
                {
                    "schema_version": 1,
                    "experiment": "solve",
                    "grid": {"T": 0.25, "N": 6},
                    "coefficients": {
                        "drift": {"preset": "linear", "params": {"b": 1.0, "c": 0.1}},
                        "diffusion": {"preset": "affine_g", "params": {"e": 0.1}},
                    },
                    "boundary": {"preset": "ramp", "params": {"slope": 2.0, "cap": 1.0}},
                    "solver": {"tol_fp": 1e-9, "strict": True},
                    "seed": 0,
                }
            ]
        },
    )

    schema_version: Literal[1] = 1
    experiment: Experiment
    grid: GridConfig
    coefficients: CoefficientsConfig = Field(default_factory=CoefficientsConfig)
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    family: Literal["deterministic", "first_hitting"] = "deterministic"
    comparison: ComparisonConfig = Field(default_factory=ComparisonConfig)
    stability: StabilityConfig = Field(default_factory=StabilityConfig)
    bounds: BoundsConfig = Field(default_factory=BoundsConfig)
    refinement_steps: List[int] = Field(default_factory=list)
    seed: int = 0

    @classmethod
    def parse_text(cls, text: str) -> "ScenarioConfig":
        """Parse a JSON document; validation errors become ConfigError naming the key."""
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            err = e.errors()[0]
            key = ".".join(str(part) for part in err["loc"]) or "<root>"
            raise ConfigError(f"{key}: {err['msg']}") from e

    @classmethod
    def load(cls, path: Path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"config: cannot read '{path}': {e}") from e
        except UnicodeDecodeError as e:
            raise ConfigError(f"config: '{path}' is not valid UTF-8: {e}") from e
        return cls.parse_text(text)
