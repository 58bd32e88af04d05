"""Stochastic representation: value functions, index process and pair roots."""
import itertools
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import BracketExhausted, GridTooLarge, IndexMismatch, PreconditionError, RootBracketFailure
from vrlab.models.coefficients import BoundarySpec, FrozenCoefficients
from vrlab.models.lattice import AdaptedField, HistoryLattice, Lattice, LatticeModel, NodeIndex, children_mean
from vrlab.models.results import RepresentationResult, StoppingRule
from vrlab.schemas.report_schema import ResidualReport
from vrlab.services.scene_service import SceneService

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 200


class RepresentationService:
    """Service class for the index process of a frozen problem."""

    @staticmethod
    def boundary_on(lattice: Lattice, X: BoundarySpec) -> AdaptedField:
        """The boundary as a field on ``lattice``, lifted to history nodes when needed."""
        if isinstance(lattice, HistoryLattice):
            return lattice.lift(X.values)
        if len(X.values) != lattice.steps + 1 or any(
                X.values[i].shape != (lattice.size(i),) for i in range(lattice.steps + 1)):
            raise IndexMismatch(f"boundary '{X.name}' does not live on this lattice")
        return X.values

    @staticmethod
    def value_function(lattice: Lattice, coeffs: FrozenCoefficients, X: BoundarySpec, l: float) -> AdaptedField:
        """
        V(t, l) by backward induction over the optimal stopping problem with constant l.

        V_N = X_N, V_i = min(X_i, f(t_i, l) dt + g(t_{i+1}) dB_i + E{V_{i+1} | F_i}).
        """
        if not math.isfinite(l):
            raise PreconditionError(f"l must be finite, got {l}")
        coeffs = coeffs.on(lattice)
        x = RepresentationService.boundary_on(lattice, X)
        v = x[lattice.steps]
        out = [v]
        for i in range(lattice.steps - 1, -1, -1):
            noise = lattice.backward_increment(lattice.cond_expect(coeffs.diff(i + 1), i), i)
            cont = coeffs.drift_l(i, l) * lattice.dt + noise + lattice.cond_expect(v, i)
            v = np.minimum(x[i], cont)
            out.append(v)
        return AdaptedField(tuple(reversed(out)))

    @staticmethod
    def continuation(lattice: Lattice, coeffs: FrozenCoefficients, x: AdaptedField, i: int, l: np.ndarray,
                     stop: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
        """
        One-step continuation value C_i(l) at every time-i node, l held constant on each node's subtree.

        Without ``stop`` the subtree is solved optimally (V = min(X, C)); with ``stop`` masks the
        stopping rule is imposed instead. ``l`` may carry leading batch axes, as may the masks.
        """
        tables = lattice.subtree(i)
        mean = lattice.subtree_mean
        depth = lattice.steps - i
        l = np.asarray(l, dtype=float)[..., None]
        v = x[lattice.steps][tables[depth]]
        for j in range(depth - 1, -1, -1):
            u = i + j
            idx = tables[j]
            noise = lattice.db(u)[idx] * mean(coeffs.diff(u + 1)[tables[j + 1]])
            cont = coeffs.drift_l(u, l, idx) * lattice.dt + noise + mean(v)
            if j == 0:
                v = cont
            elif stop is None:
                v = np.minimum(x[u][idx], cont)
            else:
                v = np.where(stop[u][..., idx], x[u][idx], cont)
        return v[..., 0]

    @staticmethod
    def bisect(h: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, tol: float,
               max_doublings: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Vectorised bisection for the switch point of a nonincreasing h (h >= 0 left of it, < 0 right).

        The bracket is widened per entry, doubling its width, until h(lo) >= 0 > h(hi) or the
        doubling cap is reached. Returns the bracket midpoint and the mask of entries still unbracketed.
        """
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        for _ in range(max_doublings):
            low_bad = h(lo) < 0
            high_bad = h(hi) >= 0
            if not (low_bad.any() or high_bad.any()):
                break
            width = hi - lo
            lo = np.where(low_bad, lo - width, lo)
            hi = np.where(high_bad, hi + width, hi)
        clamped = (h(lo) < 0) | (h(hi) >= 0)

        widest = float(np.max(hi - lo)) if lo.size else 0.0
        rounds = 0 if widest <= tol else min(MAX_BISECTIONS, math.ceil(math.log2(widest / tol)))
        for _ in range(rounds):
            mid = 0.5 * (lo + hi)
            ok = h(mid) >= 0
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return 0.5 * (lo + hi), clamped

    @staticmethod
    def index_process(lattice: Lattice, coeffs: FrozenCoefficients, X: BoundarySpec,
                      bracket: Optional[Tuple[float, float]] = None, tol_l: Optional[float] = None,
                      strict: bool = False, probes: Sequence[float] = ()) -> RepresentationResult:
        """
        L_t = sup{l : V(t, l) = X_t} at every node of times 0..N-1.

        V(t, l) = X_t exactly when the continuation C_t(l) >= X_t; C_t is strictly decreasing in l,
        so each node is one bisection, all nodes of a slice at once.

        Raises:
            BracketExhausted: in strict mode, when the bracket cap leaves nodes clamped
        """
        coeffs = coeffs.on(lattice)
        x = RepresentationService.boundary_on(lattice, X)
        B = settings.bracket_half_width
        lo, hi = bracket if bracket is not None else (-B, B)
        if not lo < hi:
            raise PreconditionError(f"bracket must satisfy l_lo < l_hi, got ({lo}, {hi})")
        if tol_l is None:
            tol_l = settings.tol_l * max(1.0, hi - lo)

        L, flags = [], []
        for i in range(lattice.steps):
            n = lattice.size(i)

            def h(l, i=i):
                return RepresentationService.continuation(lattice, coeffs, x, i, l) - x[i]

            root, clamped = RepresentationService.bisect(h, np.full(n, lo), np.full(n, hi), tol_l,
                                                         settings.bracket_max_doublings)
            L.append(root)
            flags.append(clamped)
            logger.debug(f"Index process t{i}: range [{root.min():.6g}, {root.max():.6g}], "
                         f"clamped={int(clamped.sum())}")

        result = RepresentationResult(
            lattice=lattice,
            L=AdaptedField(tuple(L)),
            clamp_flags=tuple(flags),
            bracket=(lo, hi),
            tol_l=tol_l,
            value_probes={float(l): RepresentationService.value_function(lattice, coeffs, X, l) for l in probes},
        )
        if result.clamp_count:
            logger.warning(f"Index process clamped at {result.clamp_count} nodes (bracket ({lo}, {hi}))")
            if strict:
                raise BracketExhausted(
                    f"index bracket ({lo}, {hi}) exhausted after {settings.bracket_max_doublings} doublings "
                    f"at {result.clamp_count} nodes",
                    clamped=result.clamp_count,
                )
        return result

    @staticmethod
    def pair_roots(lattice: Lattice, coeffs: FrozenCoefficients, X: BoundarySpec, i: int,
                   rules: Sequence[StoppingRule], tol_l: Optional[float] = None) -> np.ndarray:
        """
        l_{t_i, tau} for every rule and every time-i node, shape (len(rules), size(i)).

        Root of E{X_tau + sum f(u, l) dt + sum g dB | F_i} = X_i; the slope band bounds
        the root by |R(0)| / (k dt), which seeds the bracket.

        Raises:
            PreconditionError: if a rule stops at or before t_i
            RootBracketFailure: if no sign change is found (a violated slope band)
        """
        if not rules:
            raise PreconditionError("at least one stopping rule is required")
        coeffs = coeffs.on(lattice)
        x = RepresentationService.boundary_on(lattice, X)
        stop = [np.stack([r.masks[u] for r in rules]) for u in range(lattice.steps + 1)]
        if np.any(stop[i]):
            raise PreconditionError(f"stopping time must exceed t_{i} on every path")
        if tol_l is None:
            tol_l = settings.tol_l

        def h(l):
            return RepresentationService.continuation(lattice, coeffs, x, i, l, stop) - x[i]

        half = np.abs(h(np.zeros((len(rules), lattice.size(i))))) / (coeffs.lower_slope * lattice.dt) + 1.0
        roots, failed = RepresentationService.bisect(h, -half, half, tol_l, settings.bracket_max_doublings)
        if failed.any():
            raise RootBracketFailure(
                f"no sign change for the pair root at t_{i} ({int(failed.sum())} cases); "
                f"slope band violated?"
            )
        return roots

    @staticmethod
    def pair_root(model: LatticeModel, coeffs: FrozenCoefficients, X: BoundarySpec, s_node: NodeIndex,
                  tau: StoppingRule, tol_l: Optional[float] = None) -> float:
        k = model.flat(s_node)
        return float(RepresentationService.pair_roots(model, coeffs, X, s_node.time_index, [tau], tol_l)[0, k])

    @staticmethod
    def enumerate_stopping_rules(model: LatticeModel, i: int, flat: int) -> List[StoppingRule]:
        """Every stop/continue pattern over the strict descendants of one node (first entry, else t_N)."""
        if model.steps > settings.oracle_max_steps:
            raise GridTooLarge(f"stopping-time enumeration needs grid.steps <= {settings.oracle_max_steps}, "
                               f"got {model.steps}")
        tables = model.subtree(i)
        inner = [(i + j, int(node)) for j in range(1, model.steps - i) for node in tables[j][flat]]
        rules = []
        for pattern in itertools.product((False, True), repeat=len(inner)):
            masks = [np.zeros(model.size(u), dtype=bool) for u in range(model.steps + 1)]
            masks[model.steps][:] = True
            for (u, node), stops in zip(inner, pattern):
                masks[u][node] = stops
            label = "".join("1" if s else "0" for s in pattern)
            rules.append(StoppingRule(masks=tuple(masks), label=f"t{i}:{flat}:{label}"))
        return rules

    @staticmethod
    def verify_representation(lattice: Lattice, coeffs: FrozenCoefficients, X: BoundarySpec,
                              rep: RepresentationResult, tol: Optional[float] = None) -> ResidualReport:
        """
        Rebuild X_S = E{X_T + sum f(u, max_{S<=v<=u} L_v) dt + sum g dB | F_S} at every node.

        The running maximum is path dependent, so each node's subtree is enumerated path by path.
        Nodes whose subtree touches a clamped index value are excluded.
        """
        if rep.lattice is not lattice:
            raise IndexMismatch("representation was computed on a different lattice")
        SceneService.check_path_budget(lattice)
        coeffs = coeffs.on(lattice)
        x = RepresentationService.boundary_on(lattice, X)
        if tol is None:
            tol = coeffs.upper_slope * rep.tol_l * lattice.grid.horizon + 1e-9
        n_steps = lattice.steps

        per_time, excluded_nodes = [], 0
        for i in range(n_steps):
            tables = lattice.expand(i)
            depth = n_steps - i
            running = [rep.L[i][tables[0]]]
            for j in range(1, depth):
                running.append(np.maximum(np.tile(running[-1], (1, 2)), rep.L[i + j][tables[j]]))
            u_val = x[n_steps][tables[depth]]
            for j in range(depth - 1, -1, -1):
                u = i + j
                idx = tables[j]
                noise = lattice.db(u)[idx] * children_mean(coeffs.diff(u + 1)[tables[j + 1]])
                u_val = coeffs.drift_l(u, running[j], idx) * lattice.dt + noise + children_mean(u_val)
            residual = np.abs(u_val[:, 0] - x[i])
            excluded = np.zeros(lattice.size(i), dtype=bool)
            for j in range(depth):
                excluded |= rep.clamp_flags[i + j][tables[j]].any(axis=1)
            excluded_nodes += int(excluded.sum())
            per_time.append(float(residual[~excluded].max(initial=0.0)))

        report = ResidualReport(
            max_residual=max(per_time, default=0.0),
            per_time=per_time,
            excluded_nodes=excluded_nodes,
            tolerance=tol,
        )
        logger.debug(f"Representation residual {report.max_residual:.3e} (tol {tol:.3e}), "
                     f"excluded {excluded_nodes} nodes")
        return report
