"""Problem data: drift f(t,y,l), diffusion g(t,y), boundary X and frozen coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from vrlab.exceptions import InvalidCoefficients
from vrlab.models.lattice import AdaptedField, HistoryLattice, Lattice, LatticeModel

DriftFn = Callable[[Any, np.ndarray, np.ndarray], Any]
DiffusionFn = Callable[[Any, np.ndarray], Any]


def _check_constant(name: str, value: float, positive: bool = False) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InvalidCoefficients(f"{name} must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise InvalidCoefficients(f"{name} must be > 0, got {value}")
    if value < 0:
        raise InvalidCoefficients(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """f(t, y, l): strictly decreasing in l with slope band [k, K], L_y-Lipschitz in y.

    ``func`` must accept numpy arrays for y and l (broadcasting).
    """

    func: DriftFn
    lipschitz_y: float
    lower_slope: float
    upper_slope: float
    name: str = "custom"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        _check_constant("drift.lipschitz_y", self.lipschitz_y)
        _check_constant("drift.lower_slope", self.lower_slope, positive=True)
        _check_constant("drift.upper_slope", self.upper_slope, positive=True)
        if self.upper_slope < self.lower_slope:
            raise InvalidCoefficients(
                f"drift.upper_slope K={self.upper_slope} must be >= drift.lower_slope k={self.lower_slope}"
            )

    def __call__(self, t, y, l) -> np.ndarray:
        return np.asarray(self.func(t, y, l), dtype=float)

    def matches(self, other: "DriftSpec") -> bool:
        """Same drift: identical object, or same named preset with equal parameters."""
        if self is other:
            return True
        return self.name != "custom" and self.name == other.name and self.params == other.params


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """g(t, y), L_y-Lipschitz in y."""

    func: DiffusionFn
    lipschitz_y: float
    name: str = "custom"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        _check_constant("diffusion.lipschitz_y", self.lipschitz_y)

    def __call__(self, t, y) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.func(t, y), dtype=float), np.shape(y))


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Upper obstacle X on the recombining lattice; xi is its terminal slice."""

    values: AdaptedField
    name: str = "custom"
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for slice_values in self.values:
            if not np.all(np.isfinite(slice_values)):
                raise InvalidCoefficients(f"boundary '{self.name}' has non-finite values")

    @property
    def terminal(self) -> np.ndarray:
        return self.values[self.values.stop - 1]

    @property
    def sup_norm(self) -> float:
        return self.values.sup_norm()

    def shifted(self, c: float) -> "BoundarySpec":
        params = dict(self.params)
        params["shift"] = params.get("shift", 0.0) + c
        return BoundarySpec(values=self.values.shifted(c), name=self.name, params=params)

    def suffix_independent(self, model: LatticeModel) -> bool:
        for i in self.values.time_indices:
            grid = self.values[i].reshape(i + 1, model.suffix_count(i))
            if not np.all(grid == grid[:, :1]):
                return False
        return True


class FrozenCoefficients:
    """f and g with y substituted: drift_l(t, node, l) = f(t, y(node), l), diff(t, node) = g(t, y(node))."""

    def __init__(self, lattice: Lattice, drift: DriftSpec, diffusion: DiffusionSpec,
                 y: Optional[AdaptedField] = None):
        self.lattice = lattice
        self.drift = drift
        self.diffusion = diffusion
        self.y = y if y is not None else lattice.zeros()
        if len(self.y) != lattice.steps + 1:
            raise InvalidCoefficients("frozen y must cover every time slice of the lattice")
        self._g = [diffusion(lattice.times[i], self.y[i]) for i in range(lattice.steps + 1)]

    @property
    def lower_slope(self) -> float:
        return self.drift.lower_slope

    @property
    def upper_slope(self) -> float:
        return self.drift.upper_slope

    def drift_l(self, i: int, l, idx: Optional[np.ndarray] = None) -> np.ndarray:
        y = self.y[i] if idx is None else self.y[i][idx]
        return self.drift(self.lattice.times[i], y, l)

    def diff(self, i: int, idx: Optional[np.ndarray] = None) -> np.ndarray:
        return self._g[i] if idx is None else self._g[i][idx]

    def on(self, lattice: Lattice) -> "FrozenCoefficients":
        """The same coefficients expressed on ``lattice`` (node -> history lift)."""
        if lattice is self.lattice:
            return self
        if isinstance(lattice, HistoryLattice) and lattice.model is self.lattice:
            return FrozenCoefficients(lattice, self.drift, self.diffusion, lattice.lift(self.y))
        raise InvalidCoefficients("frozen coefficients belong to a different lattice")
