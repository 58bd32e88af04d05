"""Shared builders for the test modules."""
import numpy as np

from vrlab.models.coefficients import BoundarySpec
from vrlab.models.lattice import TimeGrid
from vrlab.services.scene_service import SceneService


def build_model(T: float, N: int):
    return SceneService.build_lattice(TimeGrid(horizon=T, steps=N))


def deterministic_boundary(model, fn, name="custom"):
    """Boundary X_t = fn(t) on every node."""
    return BoundarySpec(model.field_from(lambda t, w, s: np.full(np.shape(w), fn(t))), name=name)
