"""Assumption checks by finite search and the closed-form theorem constants."""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import AssumptionViolated, PreconditionError
from vrlab.models.coefficients import BoundarySpec, DiffusionSpec, DriftSpec
from vrlab.models.lattice import AdaptedField, LatticeModel
from vrlab.schemas.report_schema import AssumptionReport
from vrlab.services.scene_service import SceneService

logger = logging.getLogger(__name__)

Probe = Tuple[float, float, float]

RTOL = 1e-9
ATOL = 1e-12
FAMILIES = ("deterministic", "first_hitting")
DEFAULT_HITTING_LEVELS = (0.0, 0.1, 0.25)


def _consecutive(keys: Sequence[np.ndarray], moving: np.ndarray):
    """Sorted order and the mask of consecutive pairs sharing every key but differing in ``moving``."""
    order = np.lexsort((moving,) + tuple(reversed(keys)))
    same = np.ones(order.size - 1, dtype=bool)
    for k in keys:
        same &= k[order][1:] == k[order][:-1]
    same &= moving[order][1:] > moving[order][:-1]
    return order, same


class CoefficientService:
    """Service class for coefficient validation and theorem constants."""

    @staticmethod
    def default_probes(model: LatticeModel, X: BoundarySpec, bracket: Tuple[float, float] = (-1.0, 1.0),
                       count: Optional[int] = None) -> List[Probe]:
        """Grid times x y-range covering the boundary x l-bracket."""
        count = count or settings.probe_count
        y_bound = X.sup_norm + 1.0
        ys = np.linspace(-y_bound, y_bound, count)
        ls = np.linspace(bracket[0], bracket[1], count)
        return [(float(t), float(y), float(l)) for t in model.times for y in ys for l in ls]

    @staticmethod
    def ratio_terms(model: LatticeModel, X: AdaptedField, i: int, family: str = "deterministic",
                    levels: Sequence[float] = DEFAULT_HITTING_LEVELS, g_sq: Optional[AdaptedField] = None,
                    X_ref: Optional[AdaptedField] = None) -> List[Tuple[str, np.ndarray, np.ndarray]]:
        """
        Ratio terms for every stopping time tau > t_i of the family, per time-i node.

        Returns:
            (label, m, noise) with m = E{X_tau - X_i | F_i} / E{tau - t_i | F_i} and
            noise = sqrt(E{sum g^2 dt | F_i}) / E{tau - t_i | F_i} (zero without ``g_sq``).
            First-hitting times are those of ``X_ref`` (default ``X``).
        """
        if family not in FAMILIES:
            raise PreconditionError(f"stopping family must be one of {FAMILIES}, got '{family}'")
        out = []
        g_int = np.zeros(model.size(i))
        for j in range(i + 1, model.steps + 1):
            span = (j - i) * model.dt
            m = (SceneService.conditional_expectation(model, X[j], j, i) - X[i]) / span
            if g_sq is not None:
                g_int = g_int + SceneService.conditional_expectation(model, g_sq[j], j, i) * model.dt
            out.append((f"t{i}-t{j}", m, np.sqrt(g_int) / span))
        if family == "first_hitting":
            SceneService.check_path_budget(model)
            ref = model.along_paths(X if X_ref is None else X_ref, i)
            xp = ref if X_ref is None else model.along_paths(X, i)
            gp = None if g_sq is None else np.cumsum(model.along_paths(g_sq, i)[:, :, 1:], axis=2)
            for h in levels:
                hit = ref[:, :, 1:] >= ref[:, :, :1] + h
                hit[:, :, -1] = True
                depth = hit.argmax(axis=2) + 1
                span = depth.mean(axis=1) * model.dt
                x_tau = np.take_along_axis(xp, depth[:, :, None], axis=2)[:, :, 0]
                m = (x_tau - xp[:, :, 0]).mean(axis=1) / span
                if gp is None:
                    noise = np.zeros_like(m)
                else:
                    g_tau = np.take_along_axis(gp, depth[:, :, None] - 1, axis=2)[:, :, 0]
                    noise = np.sqrt(g_tau.mean(axis=1) * model.dt) / span
                out.append((f"hit{h:g}@t{i}", m, noise))
        return out

    @staticmethod
    def gamma_ratio(model: LatticeModel, X: BoundarySpec, g: DiffusionSpec, family: str = "deterministic",
                    levels: Sequence[float] = DEFAULT_HITTING_LEVELS) -> Tuple[float, List[float]]:
        """
        Largest ratio-bound term over the stopping family.

        Returns:
            (value, witness) with witness = [t_mu, node, ratio part, diffusion part]
        """
        g_sq = AdaptedField(tuple(g(model.times[u], np.zeros(model.size(u))) ** 2
                                  for u in range(model.steps + 1)))
        best, witness = 0.0, []
        for i in range(model.steps):
            for _, m, noise in CoefficientService.ratio_terms(model, X.values, i, family, levels, g_sq):
                total = np.abs(m) + noise
                k = int(np.argmax(total))
                if total[k] > best:
                    best = float(total[k])
                    witness = [float(model.times[i]), float(k), float(abs(m[k])), float(noise[k])]
        return best, witness

    @staticmethod
    def validate_assumptions(model: LatticeModel, f: DriftSpec, g: DiffusionSpec, X: BoundarySpec,
                             probes: Sequence[Probe], strict: bool = True,
                             gamma_declared: Optional[float] = None,
                             family: str = "deterministic") -> AssumptionReport:
        """
        Check monotonicity, slope band and Lipschitz bounds on the probes and estimate Gamma.

        Raises:
            AssumptionViolated: in strict mode, on the first failing check, carrying the probe witness
        """
        if not probes:
            raise PreconditionError("probe grid must not be empty")
        P = np.asarray(probes, dtype=float)
        t, y, l = P[:, 0], P[:, 1], P[:, 2]
        fv = np.broadcast_to(f(t, y, l), t.shape)
        k, K, L = f.lower_slope, f.upper_slope, f.lipschitz_y
        witnesses = {}

        order, same = _consecutive((t, y), l)
        dl = np.diff(l[order])[same]
        df = np.diff(fv[order])[same]
        pairs = np.flatnonzero(same)

        bad = df >= 0
        monotonicity_ok = not bad.any()
        if not monotonicity_ok:
            a = order[pairs[np.argmax(bad)]]
            b = order[pairs[np.argmax(bad)] + 1]
            witnesses["monotonicity"] = [t[a], y[a], l[a], l[b]]

        slope = np.abs(df) / dl
        bad = (slope < k * (1 - RTOL)) | (slope > K * (1 + RTOL))
        slope_band_ok = not bad.any()
        if not slope_band_ok:
            a = order[pairs[np.argmax(bad)]]
            b = order[pairs[np.argmax(bad)] + 1]
            witnesses["slope_band"] = [t[a], y[a], l[a], l[b], float(slope[np.argmax(bad)])]

        order, same = _consecutive((t, l), y)
        dy = np.diff(y[order])[same]
        bad = np.abs(np.diff(fv[order])[same]) > L * dy * (1 + RTOL) + ATOL
        lipschitz_ok = not bad.any()
        if not lipschitz_ok:
            a = order[np.flatnonzero(same)[np.argmax(bad)]]
            witnesses["lipschitz_f"] = [t[a], y[a], l[a]]
        gv = g(t, y)
        order, same = _consecutive((t,), y)
        dy = np.diff(y[order])[same]
        bad = np.abs(np.diff(gv[order])[same]) > g.lipschitz_y * dy * (1 + RTOL) + ATOL
        if bad.any():
            lipschitz_ok = False
            a = order[np.flatnonzero(same)[np.argmax(bad)]]
            witnesses["lipschitz_g"] = [t[a], y[a]]

        boundary_sup = X.sup_norm
        boundary_bound_ok = bool(math.isfinite(boundary_sup))

        gamma_ratio, ratio_witness = CoefficientService.gamma_ratio(model, X, g, family)
        gamma_drift = max(float(np.max(np.abs(f(s, np.zeros(1), np.zeros(1))))) for s in model.times)
        if ratio_witness:
            witnesses["gamma"] = ratio_witness

        report = AssumptionReport(
            gamma_estimate=max(gamma_ratio, gamma_drift),
            gamma_ratio=gamma_ratio,
            gamma_drift=gamma_drift,
            gamma_declared=gamma_declared,
            stopping_family=family,
            monotonicity_ok=monotonicity_ok,
            slope_band_ok=slope_band_ok,
            lipschitz_ok=lipschitz_ok,
            boundary_bound_ok=boundary_bound_ok,
            boundary_sup=boundary_sup,
            probe_count=len(P),
            witnesses={key: [float(v) for v in w] for key, w in witnesses.items()},
        )
        logger.debug(f"Assumption report: {report.model_dump()}")

        if not report.ok:
            failed = [name for name, ok in (("monotonicity", monotonicity_ok), ("slope_band", slope_band_ok),
                                            ("lipschitz", lipschitz_ok), ("boundary_bound", boundary_bound_ok))
                      if not ok]
            logger.warning(f"Assumption checks failed: {failed}")
            if strict:
                check = failed[0]
                witness = next((tuple(w) for key, w in report.witnesses.items() if key.startswith(check)), ())
                raise AssumptionViolated(f"assumption {check} violated at probe {witness}", check=check, witness=witness)
        return report

    @staticmethod
    def lipschitz(f: DriftSpec, g: DiffusionSpec) -> float:
        """The common Lipschitz constant L shared by f and g."""
        return max(f.lipschitz_y, g.lipschitz_y)

    @staticmethod
    def contraction_constant(f: DriftSpec, g: DiffusionSpec, T: float) -> float:
        """2TL(1 + sqrt(2) K/k (1 + sqrt(T))) + L sqrt(2T)."""
        L = CoefficientService.lipschitz(f, g)
        ratio = f.upper_slope / f.lower_slope
        return 2 * T * L * (1 + math.sqrt(2) * ratio * (1 + math.sqrt(T))) + L * math.sqrt(2 * T)

    @staticmethod
    def stability_constant(f: DriftSpec, g: DiffusionSpec, T: float) -> float:
        """sqrt(6) T L (1 + sqrt(3) K/k (1 + sqrt(T))) + L sqrt(3T)."""
        L = CoefficientService.lipschitz(f, g)
        ratio = f.upper_slope / f.lower_slope
        return math.sqrt(6) * T * L * (1 + math.sqrt(3) * ratio * (1 + math.sqrt(T))) + L * math.sqrt(3 * T)
