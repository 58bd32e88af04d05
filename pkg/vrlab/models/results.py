"""Result containers produced by the representation, Skorohod and VRBDSDE services."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from vrlab.models.lattice import AdaptedField, HistoryLattice, Lattice


@dataclass(frozen=True)
class StoppingRule:
    """A lattice stopping time as per-slice stop masks; the terminal slice always stops."""

    masks: Tuple[np.ndarray, ...]
    label: str = ""

    @classmethod
    def deterministic(cls, lattice: Lattice, j: int) -> "StoppingRule":
        """tau = t_j on every path."""
        return cls(
            masks=tuple(np.full(lattice.size(u), u >= j) for u in range(lattice.steps + 1)),
            label=f"t{j}",
        )


@dataclass
class RepresentationResult:
    """Index process L on times 0..N-1, clamp flags and optional value-function probes."""

    lattice: Lattice
    L: AdaptedField
    clamp_flags: Tuple[np.ndarray, ...]
    bracket: Tuple[float, float]
    tol_l: float
    value_probes: Dict[float, AdaptedField] = field(default_factory=dict)

    @property
    def clamp_count(self) -> int:
        return int(sum(int(np.count_nonzero(f)) for f in self.clamp_flags))


@dataclass
class SkorohodSolution:
    """Triple (Y, Z, A) on the history lattice, with the underlying index process.

    A_{0-} = -inf is carried by the ``a_minus_infinity`` sentinel, never as a number.
    """

    lattice: HistoryLattice
    X: AdaptedField
    Y: AdaptedField
    Z: AdaptedField
    A: AdaptedField
    representation: RepresentationResult
    flat_off_residual: float
    max_jump: float
    L_history: AdaptedField
    a_minus_infinity: bool = True

    @property
    def L(self) -> AdaptedField:
        """Index process on history nodes, times 0..N-1."""
        return self.L_history

    @property
    def clamp_count(self) -> int:
        return self.representation.clamp_count

    def node_fields(self) -> Dict[str, AdaptedField]:
        """Path-averaged projections onto the recombining lattice."""
        h = self.lattice
        return {name: h.project(f) for name, f in
                (("X", self.X), ("Y", self.Y), ("Z", self.Z), ("A", self.A), ("L", self.L))}

    def measurability_gap(self) -> float:
        """Largest spread of Y or A across history nodes sharing a recombining node."""
        return max(self.lattice.spread(self.Y), self.lattice.spread(self.A))


@dataclass
class Solution:
    """Fixed point of the Picard map together with its convergence diagnostics."""

    skorohod: SkorohodSolution
    iterations: int
    residual_history: List[float]
    contraction_constant: float
    certified: bool
    y0_policy: str
    tol_fp: float
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def Y(self) -> AdaptedField:
        return self.skorohod.Y

    @property
    def Z(self) -> AdaptedField:
        return self.skorohod.Z

    @property
    def A(self) -> AdaptedField:
        return self.skorohod.A

    @property
    def L(self) -> AdaptedField:
        return self.skorohod.L

    @property
    def ratios(self) -> List[float]:
        r = self.residual_history
        return [r[m + 1] / r[m] for m in range(len(r) - 1) if r[m] > 0]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())
