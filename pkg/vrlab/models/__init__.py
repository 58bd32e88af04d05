from .lattice import AdaptedField, FieldSlice, HistoryLattice, Lattice, LatticeModel, NodeIndex, TimeGrid
from .coefficients import BoundarySpec, DiffusionSpec, DriftSpec, FrozenCoefficients
from .results import RepresentationResult, SkorohodSolution, Solution, StoppingRule

__all__ = [
    "AdaptedField", "FieldSlice", "HistoryLattice", "Lattice", "LatticeModel", "NodeIndex", "TimeGrid",
    "BoundarySpec", "DiffusionSpec", "DriftSpec", "FrozenCoefficients",
    "RepresentationResult", "SkorohodSolution", "Solution", "StoppingRule",
]
