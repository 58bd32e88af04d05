"""Discrete two-noise lattices: time grid, node indexing and one-step operators.

Two information structures share one set of one-step operators:

* ``LatticeModel`` - the recombining lattice with node index
  (time_index, w_state, b_suffix). A field on it is F_t-measurable with
  F_t = F^W_t v F^B_{t,T}: W enters through its current state, B through its
  future increments. Bit 0 of ``b_suffix`` is the earliest future increment.
* ``HistoryLattice`` - nodes (W-prefix, full B-path). Used for path-dependent
  quantities such as the running supremum of the index process.

Slices are flat 1-D numpy arrays; ``up(i)``/``down(i)`` map every node at
time i to the flat index of its two W-successors at time i+1.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from vrlab.exceptions import IndexMismatch, PreconditionError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*dt on [0, T]."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (isinstance(self.horizon, (int, float)) and math.isfinite(self.horizon) and self.horizon > 0):
            raise PreconditionError(f"grid.horizon must be a positive finite number, got {self.horizon!r}")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise PreconditionError(f"grid.steps must be an integer >= 1, got {self.steps!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def time(self, i: int) -> float:
        return float(self.times[i])


@dataclass(frozen=True)
class NodeIndex:
    time_index: int
    w_state: int
    b_suffix: int


@dataclass(frozen=True)
class FieldSlice:
    """Values of a field on every node of one time slice."""

    time_index: int
    values: np.ndarray


@dataclass(frozen=True)
class AdaptedField:
    """A process: one flat slice per time index, starting at ``start``."""

    slices: Tuple[np.ndarray, ...]
    start: int = 0

    def __getitem__(self, i: int) -> np.ndarray:
        if i < self.start or i >= self.start + len(self.slices):
            raise IndexMismatch(f"time index {i} outside field range [{self.start}, {self.stop})")
        return self.slices[i - self.start]

    def __len__(self) -> int:
        return len(self.slices)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.slices)

    @property
    def stop(self) -> int:
        return self.start + len(self.slices)

    @property
    def time_indices(self) -> range:
        return range(self.start, self.stop)

    def slice(self, i: int) -> FieldSlice:
        return FieldSlice(time_index=i, values=self[i])

    def sup_norm(self) -> float:
        return max((float(np.max(np.abs(s))) for s in self.slices if s.size), default=0.0)

    def sup_diff(self, other: "AdaptedField") -> float:
        """sup-norm of the difference over the common time range."""
        lo, hi = max(self.start, other.start), min(self.stop, other.stop)
        return max((float(np.max(np.abs(self[i] - other[i]))) for i in range(lo, hi)), default=0.0)

    def shifted(self, c: float) -> "AdaptedField":
        return AdaptedField(tuple(s + c for s in self.slices), self.start)


class Lattice(ABC):
    """Common one-step operators over flat time slices."""

    def __init__(self, grid: TimeGrid):
        self.grid = grid
        self.steps = grid.steps
        self.dt = grid.dt
        self.sqrt_dt = grid.sqrt_dt
        self.times = grid.times
        self._up: List[np.ndarray] = []
        self._down: List[np.ndarray] = []
        self._db: List[np.ndarray] = []
        self._expansions = {}

    @abstractmethod
    def size(self, i: int) -> int:
        """Number of nodes at time index i."""

    @abstractmethod
    def w_state(self, i: int) -> np.ndarray:
        """Number of W up-moves up to time i, per node."""

    def up(self, i: int) -> np.ndarray:
        self._check_step(i)
        return self._up[i]

    def down(self, i: int) -> np.ndarray:
        self._check_step(i)
        return self._down[i]

    def db(self, i: int) -> np.ndarray:
        """B-increment over [t_i, t_{i+1}] seen from each time-i node."""
        self._check_step(i)
        return self._db[i]

    def w_value(self, i: int) -> np.ndarray:
        return (2.0 * self.w_state(i) - i) * self.sqrt_dt

    @property
    def total_nodes(self) -> int:
        return sum(self.size(i) for i in range(self.steps + 1))

    def _check_step(self, i: int) -> None:
        if not 0 <= i < self.steps:
            raise IndexMismatch(f"no successor slice for time index {i} (steps={self.steps})")

    def cond_expect(self, next_values: np.ndarray, i: int) -> np.ndarray:
        """E{F | F_{t_i}} for a time-(i+1) slice F: average over the W-branch."""
        return 0.5 * (next_values[self.up(i)] + next_values[self.down(i)])

    def extract_z(self, next_values: np.ndarray, i: int) -> np.ndarray:
        return (next_values[self.up(i)] - next_values[self.down(i)]) / (2.0 * self.sqrt_dt)

    def backward_increment(self, gval: np.ndarray, i: int) -> np.ndarray:
        return gval * self.db(i)

    def expand(self, i: int) -> List[np.ndarray]:
        """Descendant index tables of every time-i node.

        Entry j has shape (size(i), 2**j): column c of depth j+1 has parent
        column c mod 2**j; the first half are down-moves, the second half
        up-moves. Recombining nodes appear once per path.
        """
        if i not in self._expansions:
            tables = [np.arange(self.size(i))[:, None]]
            for j in range(self.steps - i):
                d = tables[-1]
                tables.append(np.concatenate([self._down[i + j][d], self._up[i + j][d]], axis=1))
            self._expansions[i] = tables
        return self._expansions[i]

    def subtree(self, i: int) -> List[np.ndarray]:
        """Index tables of the distinct descendants of every time-i node, depth 0..N-i.

        Paired with ``subtree_mean``, which folds a depth-(j+1) table onto depth j.
        """
        return self.expand(i)

    @staticmethod
    def subtree_mean(values: np.ndarray) -> np.ndarray:
        return children_mean(values)

    def along_paths(self, field: AdaptedField, i: int) -> np.ndarray:
        """Values of ``field`` along every W-path leaving each time-i node.

        Shape (size(i), 2**(N-i), N-i+1); paths are equally likely.
        """
        tables = self.expand(i)
        leaves = np.arange(tables[-1].shape[1])
        return np.stack([field[i + j][d[:, leaves % d.shape[1]]] for j, d in enumerate(tables)], axis=2)

    def zeros(self) -> AdaptedField:
        return AdaptedField(tuple(np.zeros(self.size(i)) for i in range(self.steps + 1)))

    def constant(self, c: float) -> AdaptedField:
        return AdaptedField(tuple(np.full(self.size(i), float(c)) for i in range(self.steps + 1)))


def children_mean(values: np.ndarray) -> np.ndarray:
    """Average the up/down halves of an expanded depth-(j+1) table."""
    m = values.shape[-1] // 2
    return 0.5 * (values[..., m:] + values[..., :m])


class LatticeModel(Lattice):
    """Recombining binomial lattice for (W, B) with B-suffix enumeration."""

    def __init__(self, grid: TimeGrid, w_dim: int = 1, b_dim: int = 1):
        super().__init__(grid)
        self.w_dim = w_dim
        self.b_dim = b_dim
        n = self.steps
        self.w_increments = (self.sqrt_dt, -self.sqrt_dt)
        self.b_increments = (self.sqrt_dt, -self.sqrt_dt)
        self.node_counts = tuple(self.size(i) for i in range(n + 1))
        for i in range(n):
            w, s = self.w_state(i), self.b_suffix(i)
            width = 1 << (n - i - 1)
            self._up.append((w + 1) * width + (s >> 1))
            self._down.append(w * width + (s >> 1))
            self._db.append(self.sqrt_dt * (2.0 * (s & 1) - 1.0))
        self._history = None
        self._subtrees = {}

    def size(self, i: int) -> int:
        return (i + 1) * (1 << (self.steps - i))

    def suffix_count(self, i: int) -> int:
        return 1 << (self.steps - i)

    def w_state(self, i: int) -> np.ndarray:
        return np.repeat(np.arange(i + 1), self.suffix_count(i))

    def b_suffix(self, i: int) -> np.ndarray:
        return np.tile(np.arange(self.suffix_count(i)), i + 1)

    def flat(self, node: NodeIndex) -> int:
        i = node.time_index
        if not 0 <= i <= self.steps:
            raise IndexMismatch(f"time_index {i} outside 0..{self.steps}")
        if not 0 <= node.w_state <= i:
            raise IndexMismatch(f"w_state {node.w_state} outside 0..{i}")
        if not 0 <= node.b_suffix < self.suffix_count(i):
            raise IndexMismatch(f"b_suffix {node.b_suffix} outside 0..{self.suffix_count(i) - 1}")
        return node.w_state * self.suffix_count(i) + node.b_suffix

    def node(self, i: int, flat: int) -> NodeIndex:
        w, s = divmod(int(flat), self.suffix_count(i))
        return NodeIndex(time_index=i, w_state=w, b_suffix=s)

    def nodes(self, i: int) -> Iterator[NodeIndex]:
        for k in range(self.size(i)):
            yield self.node(i, k)

    def field_from(self, fn) -> AdaptedField:
        """Tabulate fn(t, w_value, b_suffix) on every slice."""
        return AdaptedField(tuple(
            np.broadcast_to(np.asarray(fn(self.times[i], self.w_value(i), self.b_suffix(i)), dtype=float),
                            (self.size(i),)).copy()
            for i in range(self.steps + 1)
        ))

    def subtree(self, i: int) -> List[np.ndarray]:
        """Recombined descendants: column k of depth j is the node with k more W up-moves."""
        if i not in self._subtrees:
            w, s = self.w_state(i)[:, None], self.b_suffix(i)[:, None]
            self._subtrees[i] = [(w + np.arange(j + 1)[None, :]) * self.suffix_count(i + j) + (s >> j)
                                 for j in range(self.steps - i + 1)]
        return self._subtrees[i]

    @staticmethod
    def subtree_mean(values: np.ndarray) -> np.ndarray:
        return 0.5 * (values[..., :-1] + values[..., 1:])

    def history(self) -> "HistoryLattice":
        if self._history is None:
            self._history = HistoryLattice(self)
        return self._history


def _popcount(values: np.ndarray) -> np.ndarray:
    out = np.zeros(values.shape, dtype=np.int64)
    v = values.copy()
    while np.any(v):
        out += v & 1
        v >>= 1
    return out


class HistoryLattice(Lattice):
    """Lattice of (W-prefix, full B-path) nodes; a genuine tree in W.

    Node at time i: p in [0, 2^i) encodes the W moves so far (newest move in
    the lowest bit, 1 = up) and beta in [0, 2^N) the whole B path (bit j =
    sign of the increment on step j). Flat index p * 2^N + beta.
    """

    def __init__(self, model: LatticeModel):
        super().__init__(model.grid)
        self.model = model
        n = self.steps
        self.paths = 1 << n
        for i in range(n):
            p, beta = self.prefix(i), self.beta(i)
            self._up.append((2 * p + 1) * self.paths + beta)
            self._down.append(2 * p * self.paths + beta)
            self._db.append(self.sqrt_dt * (2.0 * ((beta >> i) & 1) - 1.0))
        self._w_state = [np.repeat(_popcount(np.arange(1 << i)), self.paths) for i in range(n + 1)]
        self._node_map = [self._w_state[i] * model.suffix_count(i) + (self.beta(i) >> i) for i in range(n + 1)]
        self._counts = [np.bincount(m, minlength=model.size(i)) for i, m in enumerate(self._node_map)]

    def size(self, i: int) -> int:
        return (1 << i) * self.paths

    def prefix(self, i: int) -> np.ndarray:
        return np.repeat(np.arange(1 << i), self.paths)

    def beta(self, i: int) -> np.ndarray:
        return np.tile(np.arange(self.paths), 1 << i)

    def w_state(self, i: int) -> np.ndarray:
        return self._w_state[i]

    def node_map(self, i: int) -> np.ndarray:
        """Flat index, on the recombining lattice, of every history node."""
        return self._node_map[i]

    def parent(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.steps:
            raise IndexMismatch(f"no parent slice for time index {i}")
        return (self.prefix(i) >> 1) * self.paths + self.beta(i)

    def ancestors(self, i: int) -> np.ndarray:
        """For every terminal node (full path), its ancestor's flat index at time i."""
        n = self.steps
        return (self.prefix(n) >> (n - i)) * self.paths + self.beta(n)

    def lift(self, field: AdaptedField) -> AdaptedField:
        return AdaptedField(tuple(field[i][self._node_map[i]] for i in field.time_indices), field.start)

    def project(self, field: AdaptedField) -> AdaptedField:
        """Path-average of a history field onto recombining nodes."""
        out = []
        for i in field.time_indices:
            sums = np.bincount(self._node_map[i], weights=field[i], minlength=self.model.size(i))
            out.append(sums / self._counts[i])
        return AdaptedField(tuple(out), field.start)

    def spread(self, field: AdaptedField) -> float:
        """Largest disagreement between history nodes sharing a recombining node."""
        worst = 0.0
        for i in field.time_indices:
            size = self.model.size(i)
            hi = np.full(size, -np.inf)
            lo = np.full(size, np.inf)
            np.maximum.at(hi, self._node_map[i], field[i])
            np.minimum.at(lo, self._node_map[i], field[i])
            worst = max(worst, float(np.max(hi - lo)))
        return worst


def as_field(values: Sequence[np.ndarray], start: int = 0) -> AdaptedField:
    return AdaptedField(tuple(np.asarray(v, dtype=float) for v in values), start)
