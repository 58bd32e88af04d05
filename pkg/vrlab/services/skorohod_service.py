"""Variant Skorohod problem: (Y, Z, A) from the running maximum of the index process."""
import logging
from typing import Optional, Tuple

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import ClampedIndex, IndexMismatch
from vrlab.models.coefficients import BoundarySpec, FrozenCoefficients
from vrlab.models.lattice import AdaptedField, HistoryLattice, LatticeModel
from vrlab.models.results import RepresentationResult, SkorohodSolution
from vrlab.services.representation_service import RepresentationService
from vrlab.services.scene_service import SceneService

logger = logging.getLogger(__name__)


class SkorohodService:
    """Service class for the frozen-coefficient reflection problem."""

    @staticmethod
    def solve_skorohod(model: LatticeModel, coeffs: FrozenCoefficients, X: BoundarySpec,
                       bracket: Optional[Tuple[float, float]] = None, tol_l: Optional[float] = None,
                       strict: Optional[bool] = None) -> SkorohodSolution:
        """
        Solve for (Y, Z, A) on the history lattice of ``model``.

        L comes from the recombining lattice when the frozen coefficients live there and is
        lifted; otherwise it is computed on history nodes directly. A_i = max_{j<=i} L_j along
        each path, A_N = A_{N-1}; Y_N = xi and
        Y_i = E{Y_{i+1} | G_i} + f(t_i, A_i) dt + g(t_{i+1}) dB_i.

        Raises:
            ClampedIndex: in strict mode, when the index process hit its bracket cap
        """
        strict = settings.strict if strict is None else strict
        history = SceneService.build_history(model)
        if coeffs.lattice is model:
            rep = RepresentationService.index_process(model, coeffs, X, bracket, tol_l)
            L = history.lift(rep.L)
        elif coeffs.lattice is history:
            rep = RepresentationService.index_process(history, coeffs, X, bracket, tol_l)
            L = rep.L
        else:
            raise IndexMismatch("frozen coefficients belong to a different lattice")
        if rep.clamp_count and strict:
            raise ClampedIndex(f"index process clamped at {rep.clamp_count} nodes; "
                               f"widen the bracket or relax strict mode")

        hc = coeffs.on(history)
        x = history.lift(X.values)
        n = model.steps

        A = [L[0]]
        for i in range(1, n):
            A.append(np.maximum(A[-1][history.parent(i)], L[i]))
        A.append(A[-1][history.parent(n)])

        Y = [None] * (n + 1)
        Z = [None] * n
        Y[n] = x[n]
        for i in range(n - 1, -1, -1):
            noise = history.backward_increment(history.cond_expect(hc.diff(i + 1), i), i)
            Y[i] = history.cond_expect(Y[i + 1], i) + hc.drift_l(i, A[i]) * history.dt + noise
            Z[i] = history.extract_z(Y[i + 1], i)

        Y_field, A_field = AdaptedField(tuple(Y)), AdaptedField(tuple(A))
        residual = SkorohodService.path_sum(history, x, Y_field, A_field)
        jump = max(float(np.max(np.abs(Y[i + 1] - Y[i][history.parent(i + 1)]))) for i in range(n))
        solution = SkorohodSolution(
            lattice=history,
            X=x,
            Y=Y_field,
            Z=AdaptedField(tuple(Z)),
            A=A_field,
            representation=rep,
            flat_off_residual=residual,
            max_jump=jump,
            L_history=L,
        )
        logger.debug(f"Skorohod solve: Y0 range [{Y[0].min():.6g}, {Y[0].max():.6g}], "
                     f"flat-off {residual:.3e}, max jump {jump:.3e}")
        return solution

    @staticmethod
    def path_sum(history: HistoryLattice, x: AdaptedField, Y: AdaptedField, A: AdaptedField) -> float:
        """E sum_{i>=1} |Y_i - X_i| (A_i - A_{i-1}); history nodes at time i are equally likely."""
        total = 0.0
        for i in range(1, history.steps + 1):
            dA = A[i] - A[i - 1][history.parent(i)]
            total += float(np.mean(np.abs(Y[i] - x[i]) * dA))
        return total

    @staticmethod
    def flat_off_residual(sol: SkorohodSolution) -> float:
        """Discrete flat-off sum; the mass at t = 0 is excluded (A_{0-} = -inf)."""
        return SkorohodService.path_sum(sol.lattice, sol.X, sol.Y, sol.A)
