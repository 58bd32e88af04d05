"""Theorem-level experiments: comparison, stability, a priori bounds and dt refinement."""
import logging
import math
from collections import Counter
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import ConfigError, ContractionViolated, HypothesisFailed
from vrlab.models.coefficients import BoundarySpec, DiffusionSpec, DriftSpec, FrozenCoefficients
from vrlab.models.lattice import AdaptedField, HistoryLattice, LatticeModel, TimeGrid
from vrlab.models.presets import make_boundary
from vrlab.models.results import Solution
from vrlab.schemas.report_schema import (
    BoundCheck,
    BoundReport,
    ComparisonReport,
    HypothesisCheck,
    RefinementRow,
    StabilityReport,
)
from vrlab.services.coefficient_service import DEFAULT_HITTING_LEVELS, CoefficientService
from vrlab.services.scene_service import SceneService
from vrlab.services.skorohod_service import SkorohodService
from vrlab.services.vrbdsde_service import VrbdsdeService

logger = logging.getLogger(__name__)

Problem = Tuple[DriftSpec, DiffusionSpec, BoundarySpec]

PERTURBATION_KINDS = ("shift", "slope")


def _first_index(mask: np.ndarray, default: int) -> np.ndarray:
    """First True along axis 1 per row, ``default`` where a row has none."""
    return np.where(mask.any(axis=1), mask.argmax(axis=1), default)


def _histogram(values: np.ndarray) -> Dict[int, int]:
    return {int(k): int(v) for k, v in sorted(Counter(values.tolist()).items())}


class AnalysisService:
    """Service class for the experiment harness."""

    @staticmethod
    def drift_order(model: LatticeModel, f1: DriftSpec, f2: DriftSpec, X: BoundarySpec) -> HypothesisCheck:
        """f1 >= f2 on the probe grid."""
        P = np.asarray(CoefficientService.default_probes(model, X), dtype=float)
        t, y, l = P[:, 0], P[:, 1], P[:, 2]
        diff = np.broadcast_to(f2(t, y, l) - f1(t, y, l), t.shape)
        k = int(np.argmax(diff))
        return HypothesisCheck(ok=bool(diff[k] <= settings.order_tol), worst=float(diff[k]),
                               witness=[float(t[k]), float(y[k]), float(l[k])])

    @staticmethod
    def boundary_order(model: LatticeModel, X1: BoundarySpec, X2: BoundarySpec) -> HypothesisCheck:
        """X1 <= X2 at every node."""
        worst, witness = -math.inf, []
        for i in range(model.steps + 1):
            diff = X1.values[i] - X2.values[i]
            k = int(np.argmax(diff))
            if diff[k] > worst:
                worst, witness = float(diff[k]), [float(i), float(k)]
        return HypothesisCheck(ok=worst <= settings.order_tol, worst=worst, witness=witness)

    @staticmethod
    def submartingale_condition(model: LatticeModel, X1: BoundarySpec, X2: BoundarySpec,
                                lipschitz: float) -> HypothesisCheck:
        """
        Delta X_s <= E{exp((L + L^2/2)(t - s)) Delta X_t | G_s} for every grid pair s < t.

        For node fields, averaging over W-branches with the B-path fixed is the
        recombining conditional expectation.
        """
        rate = lipschitz + 0.5 * lipschitz ** 2
        delta = [X1.values[i] - X2.values[i] for i in range(model.steps + 1)]
        worst, witness = -math.inf, []
        for j in range(1, model.steps + 1):
            for i in range(j):
                factor = math.exp(rate * (model.times[j] - model.times[i]))
                gap = delta[i] - factor * SceneService.conditional_expectation(model, delta[j], j, i)
                k = int(np.argmax(gap))
                if gap[k] > worst:
                    worst, witness = float(gap[k]), [float(model.times[i]), float(model.times[j]), float(k)]
        return HypothesisCheck(ok=worst <= settings.order_tol, worst=worst, witness=witness)

    @staticmethod
    def assumption_check(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X: BoundarySpec,
                         family: str = "deterministic") -> HypothesisCheck:
        """validate_assumptions without raising; worst counts the failed checks."""
        probes = CoefficientService.default_probes(model, X)
        report = CoefficientService.validate_assumptions(model, f, g, X, probes, strict=False, family=family)
        failed = [name for name, ok in (("monotonicity", report.monotonicity_ok),
                                        ("slope_band", report.slope_band_ok),
                                        ("lipschitz", report.lipschitz_ok),
                                        ("boundary_bound", report.boundary_bound_ok)) if not ok]
        witness = next((w for key, w in report.witnesses.items() if failed and key.startswith(failed[0])), [])
        return HypothesisCheck(ok=report.ok, worst=float(len(failed)), witness=list(witness))

    @staticmethod
    def crossing_times(history: HistoryLattice, A1: AdaptedField, A2: AdaptedField,
                       epsilon: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per full path: mu = first t < T with A2 > A1 + eps, tau = first t in [mu, T) with A1 > A2 - eps/2.

        Both default to N (the horizon).
        """
        n = history.steps
        a1 = np.stack([A1[i][history.ancestors(i)] for i in range(n)], axis=1)
        a2 = np.stack([A2[i][history.ancestors(i)] for i in range(n)], axis=1)
        mu = _first_index(a2 > a1 + epsilon, n)
        after = np.arange(n)[None, :] >= mu[:, None]
        tau = _first_index(after & (a1 > a2 - 0.5 * epsilon), n)
        return mu, tau

    @staticmethod
    def compare_runs(model: LatticeModel, first: Problem, second: Problem, epsilon: Optional[float] = None,
                     strict: Optional[bool] = None,
                     **solver_opts) -> Tuple[ComparisonReport, Solution, Solution]:
        """
        Check the comparison hypotheses, solve both problems and test A1 >= A2 (and Y1 <= Y2 for equal drifts).

        Failed hypotheses are recorded in the report; the solves still run.
        """
        f1, g1, X1 = first
        f2, g2, X2 = second
        lipschitz = max(CoefficientService.lipschitz(f1, g1), CoefficientService.lipschitz(f2, g2))
        checks = {
            "drift_order": AnalysisService.drift_order(model, f1, f2, X1),
            "boundary_order": AnalysisService.boundary_order(model, X1, X2),
            "submartingale_condition": AnalysisService.submartingale_condition(model, X1, X2, lipschitz),
            "assumptions_first": AnalysisService.assumption_check(model, f1, g1, X1),
            "assumptions_second": AnalysisService.assumption_check(model, f2, g2, X2),
        }
        failed = [name for name, check in checks.items() if not check.ok]
        if failed:
            logger.warning(f"{HypothesisFailed.__name__}: comparison hypotheses {failed}; solving anyway")

        sol1 = VrbdsdeService.solve(model, f1, g1, X1, strict=strict, **solver_opts)
        sol2 = VrbdsdeService.solve(model, f2, g2, X2, strict=strict, **solver_opts)
        if epsilon is None:
            epsilon = 10.0 * max(sol1.tol_fp, sol2.tol_fp)

        history = sol1.skorohod.lattice
        n = model.steps
        a_violation = max(float(np.max(sol2.A[i] - sol1.A[i])) for i in range(n + 1))
        y_order_ok, y_violation = None, None
        if f1.matches(f2):
            y_violation = max(float(np.max(sol1.Y[i] - sol2.Y[i])) for i in range(n + 1))
            y_order_ok = y_violation <= settings.order_tol
        mu, tau = AnalysisService.crossing_times(history, sol1.A, sol2.A, epsilon)

        report = ComparisonReport(
            hypothesis_checks=checks,
            epsilon=epsilon,
            mu_histogram=_histogram(mu),
            tau_histogram=_histogram(tau),
            mu_before_horizon=float(np.mean(mu < n)),
            a_order_ok=a_violation <= settings.order_tol,
            y_order_ok=y_order_ok,
            max_violation=a_violation,
            y_max_violation=y_violation,
            failed_hypotheses=failed,
            status=HypothesisFailed.__name__ if failed else "ok",
        )
        logger.info(f"Comparison: a_order_ok={report.a_order_ok}, y_order_ok={report.y_order_ok}, "
                    f"status={report.status}")
        return report, sol1, sol2

    @staticmethod
    def compare(model: LatticeModel, first: Problem, second: Problem, epsilon: Optional[float] = None,
                strict: Optional[bool] = None, **solver_opts) -> ComparisonReport:
        return AnalysisService.compare_runs(model, first, second, epsilon, strict, **solver_opts)[0]

    @staticmethod
    def m_gap(model: LatticeModel, Xn: BoundarySpec, X0: BoundarySpec, family: str = "deterministic",
              levels: Sequence[float] = DEFAULT_HITTING_LEVELS) -> float:
        """sup over mu and tau > mu in the family of |m^n_{mu,tau} - m^0_{mu,tau}|; hitting times follow X0."""
        worst = 0.0
        for i in range(model.steps):
            terms_n = CoefficientService.ratio_terms(model, Xn.values, i, family, levels, X_ref=X0.values)
            terms_0 = CoefficientService.ratio_terms(model, X0.values, i, family, levels)
            for (_, mn, _), (_, m0, _) in zip(terms_n, terms_0):
                worst = max(worst, float(np.max(np.abs(mn - m0))))
        return worst

    @staticmethod
    def perturb(model: LatticeModel, X0: BoundarySpec, kind: str, n: int) -> BoundarySpec:
        """X^n from X^0: ``shift`` adds 1/n, ``slope`` adds 1/n to the preset's slope."""
        if n < 1:
            raise ConfigError(f"experiment.perturbations: n must be >= 1, got {n}")
        if kind == "shift":
            return X0.shifted(1.0 / n)
        if kind == "slope":
            if "slope" not in X0.params:
                raise ConfigError(f"experiment.kind: boundary '{X0.name}' has no slope parameter")
            params = dict(X0.params)
            params["slope"] = params["slope"] + 1.0 / n
            return make_boundary(model, X0.name, **params)
        raise ConfigError(f"experiment.kind must be one of {PERTURBATION_KINDS}, got '{kind}'")

    @staticmethod
    def stability_experiment(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X0: BoundarySpec,
                             perturbations: Sequence[Tuple[str, BoundarySpec]], family: str = "deterministic",
                             strict: Optional[bool] = None, **solver_opts) -> List[StabilityReport]:
        """
        Solve for each X^n and check the stability estimates for Y and A.

        Raises:
            ContractionViolated: in strict mode, when the stability constant is >= 1
        """
        strict = settings.strict if strict is None else strict
        T, k, K = model.grid.horizon, f.lower_slope, f.upper_slope
        L = CoefficientService.lipschitz(f, g)
        c = CoefficientService.stability_constant(f, g, T)
        if c >= 1.0:
            message = f"stability constant c'={c:.6g} >= 1 (T={T}, L={L}, k={k}, K={K})"
            if strict:
                raise ContractionViolated(message, constant=c)
            logger.warning(f"{message}; bound not applicable")
        factor = math.sqrt(3) / (1.0 - c) if c < 1.0 else math.inf

        base_ok = AnalysisService.assumption_check(model, f, g, X0, family).ok
        sol0 = VrbdsdeService.solve(model, f, g, X0, strict=strict, **solver_opts)
        reports = []
        for label, Xn in perturbations:
            soln = VrbdsdeService.solve(model, f, g, Xn, strict=strict, **solver_opts)
            assumptions_ok = base_ok and AnalysisService.assumption_check(model, f, g, Xn, family).ok
            m_gap = AnalysisService.m_gap(model, Xn, X0, family)
            xi_gap = float(np.max(np.abs(Xn.terminal - X0.terminal)))
            y_gap = soln.Y.sup_diff(sol0.Y)
            a_gap = soln.A.sup_diff(sol0.A)
            rhs = factor * (xi_gap + math.sqrt(6) * T * K / k * m_gap / k)
            a_rhs = math.sqrt(3) / k * m_gap + math.sqrt(3) * L / k * (1 + math.sqrt(T)) * y_gap
            tol = settings.order_tol
            reports.append(StabilityReport(
                label=label,
                family=family,
                m_gap=m_gap,
                xi_gap=xi_gap,
                y_gap=y_gap,
                a_gap=a_gap,
                stability_constant=c,
                bound_rhs=rhs,
                bound_ok=y_gap <= rhs + tol,
                a_bound_rhs=a_rhs,
                a_bound_ok=a_gap <= a_rhs + tol,
                assumptions_ok=assumptions_ok,
            ))
            logger.debug(f"Stability {label}: y_gap={y_gap:.6g} <= {rhs:.6g}, a_gap={a_gap:.6g} <= {a_rhs:.6g}")
        return reports

    @staticmethod
    def apriori_bounds(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X: BoundarySpec,
                       y: AdaptedField, y_prime: AdaptedField, family: str = "deterministic",
                       perturbed: Optional[BoundarySpec] = None, **solver_opts) -> BoundReport:
        """
        Measured side against the closed-form right-hand side of each a priori estimate.

        a0_sup: ||A^0|| <= 3 sqrt(3) Gamma / k with y = 0 frozen.
        a_lipschitz: ||A(y) - A(y')|| <= sqrt(2) L / k (1 + sqrt(T)) ||y - y'||.
        y_growth: ||Phi(y)|| <= ||xi|| + sqrt(2) sup (E sum g(s,0)^2 dt)^(1/2) + c ||y|| + 2T(1 + 3 sqrt(3) K/k) Gamma.
        a_stability (with ``perturbed``): ||A^n - A^0|| <= sqrt(3)/k m_gap + sqrt(3) L / k (1 + sqrt(T)) ||Y^n - Y^0||.
        """
        T, k, K = model.grid.horizon, f.lower_slope, f.upper_slope
        L = CoefficientService.lipschitz(f, g)
        probes = CoefficientService.default_probes(model, X)
        assumptions = CoefficientService.validate_assumptions(model, f, g, X, probes, strict=False, family=family)
        gamma = assumptions.gamma
        bracket, tol_l = solver_opts.get("bracket"), solver_opts.get("tol_l")
        checks = []

        def check(name: str, measured: float, bound: float) -> None:
            checks.append(BoundCheck(name=name, measured=measured, bound=bound, slack=bound - measured,
                                     tolerance=settings.order_tol))

        zero = SkorohodService.solve_skorohod(model, FrozenCoefficients(model, f, g), X, bracket, tol_l, False)
        check("a0_sup", zero.A.sup_norm(), 3 * math.sqrt(3) * gamma / k)

        sol_y = VrbdsdeService.phi_map(model, f, g, X, y, bracket, tol_l, False)
        sol_yp = VrbdsdeService.phi_map(model, f, g, X, y_prime, bracket, tol_l, False)
        history = sol_y.lattice
        y_h = y if y[model.steps].shape == (history.size(model.steps),) else history.lift(y)
        yp_h = y_prime if y_prime[model.steps].shape == (history.size(model.steps),) else history.lift(y_prime)
        check("a_lipschitz", sol_y.A.sup_diff(sol_yp.A),
              math.sqrt(2) * L / k * (1 + math.sqrt(T)) * y_h.sup_diff(yp_h))

        g0 = AdaptedField(tuple(g(model.times[u], np.zeros(model.size(u))) ** 2 for u in range(model.steps + 1)))
        noise = 0.0
        for i in range(model.steps):
            acc = sum(SceneService.conditional_expectation(model, g0[j], j, i) for j in range(i + 1, model.steps + 1))
            noise = max(noise, float(np.max(np.sqrt(acc * model.dt))))
        c = CoefficientService.contraction_constant(f, g, T)
        growth = (float(np.max(np.abs(X.terminal))) + math.sqrt(2) * noise + c * y_h.sup_norm()
                  + 2 * T * (1 + 3 * math.sqrt(3) * K / k) * gamma)
        check("y_growth", sol_y.Y.sup_norm(), growth)

        if perturbed is not None:
            sol0 = VrbdsdeService.solve(model, f, g, X, strict=False, **solver_opts)
            soln = VrbdsdeService.solve(model, f, g, perturbed, strict=False, **solver_opts)
            m_gap = AnalysisService.m_gap(model, perturbed, X, family)
            check("a_stability", soln.A.sup_diff(sol0.A),
                  math.sqrt(3) / k * m_gap + math.sqrt(3) * L / k * (1 + math.sqrt(T)) * soln.Y.sup_diff(sol0.Y))

        report = BoundReport(gamma_estimate=gamma, checks=checks)
        for c_ in checks:
            if not c_.ok:
                logger.warning(f"A priori bound {c_.name} violated: {c_.measured:.6g} > {c_.bound:.6g}")
        return report

    @staticmethod
    def refinement_table(horizon: float, steps: Sequence[int], f: DriftSpec, g: DiffusionSpec,
                         boundary: Callable[[LatticeModel], BoundarySpec], **solver_opts) -> List[RefinementRow]:
        """Solve one scenario for several N and tabulate Y_0, ||A||, iterations and flat-off."""
        rows = []
        for n in steps:
            model = SceneService.build_lattice(TimeGrid(horizon=horizon, steps=n))
            sol = VrbdsdeService.solve(model, f, g, boundary(model), **solver_opts)
            rows.append(RefinementRow(
                steps=n,
                dt=model.dt,
                y0=float(np.mean(sol.Y[0])),
                a_sup=sol.A.sup_norm(),
                iterations=sol.iterations,
                flat_off_residual=sol.skorohod.flat_off_residual,
            ))
        return rows
