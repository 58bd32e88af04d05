"""Picard iteration of the map y -> Y for the variant reflected BDSDE."""
import logging
from typing import Optional, Tuple

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import ConfigError, ContractionViolated, NoConvergence, TheoremCheckFailed
from vrlab.models.coefficients import BoundarySpec, DiffusionSpec, DriftSpec, FrozenCoefficients
from vrlab.models.lattice import AdaptedField, LatticeModel
from vrlab.models.results import SkorohodSolution, Solution
from vrlab.services.coefficient_service import CoefficientService
from vrlab.services.scene_service import SceneService
from vrlab.services.skorohod_service import SkorohodService

logger = logging.getLogger(__name__)

Y0_POLICIES = ("boundary", "zero")


class VrbdsdeService:
    """Service class for the fixed-point solver."""

    @staticmethod
    def freeze(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, y: AdaptedField) -> FrozenCoefficients:
        """
        Substitute y into f and g on the coarsest lattice that carries it.

        y may live on the recombining lattice or on its history lattice; a history field that
        agrees across every recombining node is projected back down.
        """
        n = model.steps
        if f.lipschitz_y == 0 and g.lipschitz_y == 0:
            return FrozenCoefficients(model, f, g)
        if y[n].shape == (model.size(n),):
            return FrozenCoefficients(model, f, g, y)
        history = model.history()
        if history.spread(y) == 0.0:
            return FrozenCoefficients(model, f, g, history.project(y))
        return FrozenCoefficients(history, f, g, y)

    @staticmethod
    def phi_map(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X: BoundarySpec, y: AdaptedField,
                bracket: Optional[Tuple[float, float]] = None, tol_l: Optional[float] = None,
                strict: Optional[bool] = None) -> SkorohodSolution:
        """Phi(y): the Skorohod solution with f(t, y_t, l) and g(t, y_t) frozen along each path."""
        coeffs = VrbdsdeService.freeze(model, f, g, y)
        return SkorohodService.solve_skorohod(model, coeffs, X, bracket, tol_l, strict)

    @staticmethod
    def initial_guess(model: LatticeModel, X: BoundarySpec, policy: str) -> AdaptedField:
        if policy == "boundary":
            return X.values
        if policy == "zero":
            return model.zeros()
        raise ConfigError(f"solver.y0_policy must be one of {Y0_POLICIES}, got '{policy}'")

    @staticmethod
    def solve(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X: BoundarySpec,
              tol_fp: Optional[float] = None, max_iter: Optional[int] = None, y0_policy: Optional[str] = None,
              strict: Optional[bool] = None, bracket: Optional[Tuple[float, float]] = None,
              tol_l: Optional[float] = None) -> Solution:
        """
        Iterate y^{m+1} = Phi(y^m) until the sup-norm step falls below tol_fp.

        Raises:
            ContractionViolated: in strict mode, when the contraction constant is >= 1
            NoConvergence: when max_iter iterations do not reach tol_fp
            TheoremCheckFailed: in strict mode, when a post-hoc theorem check fails
        """
        strict = settings.strict if strict is None else strict
        y0_policy = y0_policy or settings.y0_policy
        max_iter = max_iter or settings.max_iter
        if tol_fp is None:
            tol_fp = settings.tol_fp_scale * (1.0 + X.sup_norm)

        c = CoefficientService.contraction_constant(f, g, model.grid.horizon)
        certified = c < 1.0
        if not certified:
            message = (f"contraction condition violated: contraction constant c={c:.6g} >= 1 "
                       f"(T={model.grid.horizon}, L={CoefficientService.lipschitz(f, g)}, "
                       f"k={f.lower_slope}, K={f.upper_slope})")
            if strict:
                raise ContractionViolated(message, constant=c)
            logger.warning(f"{message}; running in exploration mode, result not certified")

        y = VrbdsdeService.initial_guess(model, X, y0_policy)
        history = SceneService.build_history(model)
        if y[model.steps].shape != (history.size(model.steps),):
            y = history.lift(y)

        residuals = []
        sol = None
        for m in range(1, max_iter + 1):
            sol = VrbdsdeService.phi_map(model, f, g, X, y, bracket, tol_l, strict)
            residuals.append(sol.Y.sup_diff(y))
            y = sol.Y
            logger.debug(f"Picard iteration {m}: residual {residuals[-1]:.3e}")
            if residuals[-1] < tol_fp:
                break
        else:
            raise NoConvergence(
                f"Picard iteration did not reach tol_fp={tol_fp:.3e} in solver.max_iter={max_iter} iterations "
                f"(last residual {residuals[-1]:.3e})",
                residual_history=residuals,
            )

        checks = VrbdsdeService.theorem_checks(sol, f)
        solution = Solution(
            skorohod=sol,
            iterations=len(residuals),
            residual_history=residuals,
            contraction_constant=c,
            certified=certified,
            y0_policy=y0_policy,
            tol_fp=tol_fp,
            checks=checks,
        )
        logger.info(f"VRBDSDE converged in {solution.iterations} iterations, c={c:.4g}, "
                    f"Y0 in [{sol.Y[0].min():.6g}, {sol.Y[0].max():.6g}]")

        failed = [name for name, ok in checks.items() if not ok]
        if failed:
            logger.warning(f"Theorem checks failed: {failed}")
            if strict:
                raise TheoremCheckFailed(f"post-hoc theorem checks failed: {', '.join(failed)}", failed=failed)
        return solution

    @staticmethod
    def theorem_checks(sol: SkorohodSolution, f: DriftSpec) -> dict:
        """Y <= X, Y_N = xi, flat-off and the corollary Y_0 = X_0."""
        n = sol.lattice.steps
        eps = f.upper_slope * sol.representation.tol_l * sol.lattice.grid.horizon + 1e-9
        gap = max(float(np.max(sol.Y[i] - sol.X[i])) for i in range(n + 1))
        return {
            "below_boundary": gap <= eps,
            "terminal": bool(np.array_equal(sol.Y[n], sol.X[n])),
            "flat_off": sol.flat_off_residual <= settings.flat_off_tol,
            "root_contact": float(np.max(np.abs(sol.Y[0] - sol.X[0]))) <= eps,
        }
