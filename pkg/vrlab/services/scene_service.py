"""Lattice construction and exact conditional-expectation operators."""
import logging

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import GridTooLarge, IndexMismatch, UnsupportedDimension
from vrlab.models.lattice import FieldSlice, HistoryLattice, Lattice, LatticeModel, NodeIndex, TimeGrid

logger = logging.getLogger(__name__)


class SceneService:
    """Service class for the two-noise lattice."""

    @staticmethod
    def build_lattice(grid: TimeGrid, w_dim: int = 1, b_dim: int = 1) -> LatticeModel:
        """
        Build the recombining (W, B-suffix) lattice.

        Raises:
            UnsupportedDimension: if either noise is not one-dimensional
            GridTooLarge: if N exceeds max_steps or 2^N (N+1)^2 exceeds the node budget
        """
        if w_dim != 1 or b_dim != 1:
            raise UnsupportedDimension(f"only w_dim = b_dim = 1 is supported, got w_dim={w_dim}, b_dim={b_dim}")
        n = grid.steps
        weight = (1 << n) * (n + 1) * (n + 1)
        if n > settings.max_steps or weight > settings.node_budget:
            logger.warning(f"Rejected grid: steps={n}, weight={weight}, budget={settings.node_budget}")
            raise GridTooLarge(
                f"grid.steps={n} too large: 2^N(N+1)^2={weight} exceeds node budget {settings.node_budget} "
                f"or max_steps {settings.max_steps}"
            )
        model = LatticeModel(grid, w_dim, b_dim)
        logger.debug(f"Built lattice: T={grid.horizon}, N={n}, node_counts={model.node_counts}")
        return model

    @staticmethod
    def build_history(model: LatticeModel) -> HistoryLattice:
        """Full-history lattice for path-dependent solves, within the history node budget."""
        n = model.steps
        total = (1 << n) * ((1 << (n + 1)) - 1)
        if total > settings.history_node_budget:
            raise GridTooLarge(
                f"grid.steps={n} too large for path-dependent solves: {total} history nodes "
                f"exceed budget {settings.history_node_budget}"
            )
        return model.history()

    @staticmethod
    def _check_consecutive(next_field: FieldSlice, at: NodeIndex, model: LatticeModel) -> int:
        if next_field.time_index != at.time_index + 1:
            raise IndexMismatch(
                f"field at time {next_field.time_index} is not the successor slice of node time {at.time_index}"
            )
        if next_field.values.shape != (model.size(next_field.time_index),):
            raise IndexMismatch(f"field slice has {next_field.values.size} values, "
                                f"expected {model.size(next_field.time_index)}")
        return model.flat(at)

    @staticmethod
    def cond_expect(model: LatticeModel, next_field: FieldSlice, at: NodeIndex) -> float:
        """E{F | F_{t_i}} at one node: the B-step is known, only the W-branch is averaged."""
        k = SceneService._check_consecutive(next_field, at, model)
        return float(model.cond_expect(next_field.values, at.time_index)[k])

    @staticmethod
    def extract_z(model: LatticeModel, next_y: FieldSlice, at: NodeIndex) -> float:
        """Two-point martingale representation coefficient (up - down) / (2 sqrt(dt))."""
        k = SceneService._check_consecutive(next_y, at, model)
        return float(model.extract_z(next_y.values, at.time_index)[k])

    @staticmethod
    def backward_increment(model: LatticeModel, gval_next: float, at: NodeIndex) -> float:
        """gval_next * dB_i, the integrand taken at t_{i+1} (backward Ito convention)."""
        k = model.flat(at)
        return float(gval_next * model.db(at.time_index)[k])

    @staticmethod
    def conditional_expectation(lattice: Lattice, values: np.ndarray, j: int, i: int) -> np.ndarray:
        """E{F | F_{t_i}} for a time-j slice F, j >= i, by the tower property."""
        if j < i:
            raise IndexMismatch(f"cannot condition a time-{j} field on the later time {i}")
        out = values
        for u in range(j - 1, i - 1, -1):
            out = lattice.cond_expect(out, u)
        return out

    @staticmethod
    def check_path_budget(lattice: Lattice) -> None:
        """Per-node path enumeration holds 4^N entries per depth; refuse beyond the path budget."""
        entries = 1 << (2 * lattice.steps)
        if entries > settings.path_budget:
            raise GridTooLarge(
                f"grid.steps={lattice.steps} too large for path enumeration: 4^N={entries} "
                f"exceeds path budget {settings.path_budget}"
            )
