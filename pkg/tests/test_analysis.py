"""
Experiment harness tests: comparison, stability, a priori bounds and refinement.
"""
import math

import numpy as np
import pytest

from tests.helpers import build_model
from vrlab.exceptions import ConfigError, ContractionViolated, HypothesisFailed
from vrlab.models.lattice import AdaptedField
from vrlab.models.presets import affine_diffusion, constant_boundary, linear_drift, ramp_boundary
from vrlab.services.analysis_service import AnalysisService


@pytest.fixture
def short_ramp(short_model):
    return ramp_boundary(short_model, slope=2.0, cap=1.0)


@pytest.mark.unit
class TestHypotheses:
    """Test suite for the comparison hypotheses."""

    def test_drift_order(self, unit_model, minus_l, ramp):
        """Test f1 = -l + 0.1 dominates f2 = -l and not the other way round."""
        shifted = linear_drift(a=0.1, b=1.0)
        assert AnalysisService.drift_order(unit_model, shifted, minus_l, ramp).ok
        check = AnalysisService.drift_order(unit_model, minus_l, shifted, ramp)
        assert not check.ok
        assert check.worst == pytest.approx(0.1)
        assert len(check.witness) == 3

    def test_boundary_order(self, unit_model, ramp):
        """Test X1 <= X2 for an upward shift."""
        assert AnalysisService.boundary_order(unit_model, ramp, ramp.shifted(0.1)).ok
        check = AnalysisService.boundary_order(unit_model, ramp.shifted(0.1), ramp)
        assert not check.ok
        assert check.worst == pytest.approx(0.1)

    def test_submartingale_constant_shift(self, unit_model, ramp):
        """Test that a constant negative gap satisfies the condition only without coupling."""
        X2 = ramp.shifted(0.1)
        assert AnalysisService.submartingale_condition(unit_model, ramp, X2, 0.0).ok
        check = AnalysisService.submartingale_condition(unit_model, ramp, X2, 0.1)
        assert not check.ok
        assert check.worst == pytest.approx(-0.1 + 0.1 * math.exp(0.105 * 1.0))

    def test_crossing_times(self):
        """Test mu and tau on hand-built running maxima."""
        history = build_model(1.0, 2).history()
        zero = history.zeros()
        one = history.constant(1.0)
        mu, tau = AnalysisService.crossing_times(history, zero, one, 0.01)
        assert np.all(mu == 0) and np.all(tau == 2)
        mu, tau = AnalysisService.crossing_times(history, zero, zero, 0.01)
        assert np.all(mu == 2) and np.all(tau == 2)

    def test_crossing_then_recovery(self):
        """Test that tau is the first time A1 climbs back within epsilon / 2."""
        history = build_model(1.0, 2).history()
        A1 = AdaptedField((np.zeros(history.size(0)), np.ones(history.size(1)), np.ones(history.size(2))))
        A2 = history.constant(0.5)
        mu, tau = AnalysisService.crossing_times(history, A1, A2, 0.1)
        assert np.all(mu == 0) and np.all(tau == 1)


@pytest.mark.integration
class TestCompare:
    """Test suite for the comparison experiment."""

    def test_identical_problems(self, unit_model, minus_l, zero_g, ramp):
        """Test that identical inputs give equal A and no crossings."""
        report = AnalysisService.compare(unit_model, (minus_l, zero_g, ramp), (minus_l, zero_g, ramp))
        n = unit_model.steps
        assert report.status == "ok"
        assert report.a_order_ok and report.y_order_ok
        assert report.mu_histogram == {n: unit_model.history().size(n)}
        assert report.mu_before_horizon == 0.0

    def test_drift_shift(self, short_model, minus_l, zero_g, short_ramp):
        """Test that a larger drift gives a larger increasing process."""
        f1 = linear_drift(a=0.1, b=1.0)
        report, sol1, sol2 = AnalysisService.compare_runs(short_model, (f1, zero_g, short_ramp),
                                                          (minus_l, zero_g, short_ramp))
        assert not report.failed_hypotheses
        assert all(check.ok for check in report.hypothesis_checks.values())
        assert {"assumptions_first", "assumptions_second"} <= set(report.hypothesis_checks)
        assert report.a_order_ok
        assert report.y_order_ok is None
        assert sol1.A.sup_diff(sol2.A) == pytest.approx(0.1, abs=1e-8)

    def test_boundary_shift(self, short_model, minus_l, zero_g, short_ramp):
        """Test that a higher obstacle with the same drift gives a larger Y."""
        report = AnalysisService.compare(short_model, (minus_l, zero_g, short_ramp),
                                         (minus_l, zero_g, short_ramp.shifted(0.1)))
        assert report.status == "ok"
        assert report.a_order_ok
        assert report.y_order_ok is True
        assert report.y_max_violation == pytest.approx(-0.1, abs=1e-8)

    def test_failed_hypothesis_recorded(self, short_model, minus_l, zero_g, short_ramp):
        """Test that a reversed boundary order is reported and the solves still run."""
        report = AnalysisService.compare(short_model, (minus_l, zero_g, short_ramp.shifted(0.1)),
                                         (minus_l, zero_g, short_ramp))
        assert report.status == HypothesisFailed.__name__
        assert report.failed_hypotheses == ["boundary_order"]
        assert report.y_order_ok is False

    def test_assumption_failure_recorded(self, short_model, cubic_drift, zero_g, short_ramp):
        """Test that coefficients outside the slope band are reported for both problems and still solved."""
        report = AnalysisService.compare(short_model, (cubic_drift, zero_g, short_ramp),
                                         (cubic_drift, zero_g, short_ramp.shifted(0.1)), strict=False)
        assert report.failed_hypotheses == ["assumptions_first", "assumptions_second"]
        assert report.status == HypothesisFailed.__name__
        assert report.hypothesis_checks["assumptions_first"].worst >= 1.0
        assert report.y_order_ok is True


@pytest.mark.unit
class TestPerturb:
    """Test suite for building perturbed boundaries."""

    def test_shift(self, unit_model, ramp):
        """Test the constant shift 1/n."""
        Xn = AnalysisService.perturb(unit_model, ramp, "shift", 4)
        assert Xn.values.sup_diff(ramp.values) == pytest.approx(0.25)

    def test_slope(self, unit_model, ramp):
        """Test the slope perturbation 2 + 1/n of the ramp."""
        Xn = AnalysisService.perturb(unit_model, ramp, "slope", 2)
        assert Xn.params["slope"] == pytest.approx(2.5)
        assert Xn.values[1][0] == pytest.approx(0.625)

    def test_slope_needs_slope_parameter(self, unit_model):
        """Test that a constant preset cannot be tilted."""
        with pytest.raises(ConfigError):
            AnalysisService.perturb(unit_model, constant_boundary(unit_model, 1.0), "slope", 1)

    @pytest.mark.parametrize("kind,n", [("shift", 0), ("scale", 1)])
    def test_invalid(self, unit_model, ramp, kind, n):
        """Test invalid perturbation requests."""
        with pytest.raises(ConfigError):
            AnalysisService.perturb(unit_model, ramp, kind, n)

    def test_m_gap(self, unit_model, ramp):
        """Test that shifts cancel in the quotients while slopes do not."""
        shifted = AnalysisService.perturb(unit_model, ramp, "shift", 1)
        assert AnalysisService.m_gap(unit_model, shifted, ramp) == pytest.approx(0.0, abs=1e-12)
        tilted = AnalysisService.perturb(unit_model, ramp, "slope", 1)
        assert AnalysisService.m_gap(unit_model, tilted, ramp) == pytest.approx(1.0)


@pytest.mark.integration
class TestStability:
    """Test suite for the stability experiment."""

    def test_constant_shifts(self, unit_model, minus_l, zero_g, ramp):
        """Test that Y moves by exactly 1/n and the estimate holds."""
        ns = (1, 2, 4, 8)
        perturbations = [(f"n={n}", AnalysisService.perturb(unit_model, ramp, "shift", n)) for n in ns]
        reports = AnalysisService.stability_experiment(unit_model, minus_l, zero_g, ramp, perturbations,
                                                       tol_l=1e-13)
        for report, n in zip(reports, ns):
            assert report.xi_gap == pytest.approx(1.0 / n)
            assert report.y_gap == pytest.approx(1.0 / n, abs=1e-10)
            assert report.m_gap == pytest.approx(0.0, abs=1e-12)
            assert report.bound_rhs == pytest.approx(math.sqrt(3) / n, abs=1e-10)
            assert report.bound_ok and report.a_bound_ok
            assert report.assumptions_ok
        gaps = [r.y_gap for r in reports]
        assert gaps == sorted(gaps, reverse=True)

    def test_slope_perturbation(self, unit_model, minus_l, zero_g, ramp):
        """Test the estimate for steeper ramps."""
        perturbations = [(f"n={n}", AnalysisService.perturb(unit_model, ramp, "slope", n)) for n in (1, 2)]
        reports = AnalysisService.stability_experiment(unit_model, minus_l, zero_g, ramp, perturbations)
        assert all(r.bound_ok and r.a_bound_ok for r in reports)
        assert reports[0].m_gap >= reports[1].m_gap

    def test_assumption_failure_flagged(self, unit_model, cubic_drift, zero_g, ramp):
        """Test that each report carries a failed assumption check for -l^3."""
        perturbations = [(f"n={n}", AnalysisService.perturb(unit_model, ramp, "shift", n)) for n in (1, 2)]
        reports = AnalysisService.stability_experiment(unit_model, cubic_drift, zero_g, ramp, perturbations,
                                                       strict=False)
        assert len(reports) == 2
        assert not any(r.assumptions_ok for r in reports)

    def test_refuses_large_constant(self, unit_model, ramp):
        """Test that strict mode refuses c' >= 1."""
        with pytest.raises(ContractionViolated):
            AnalysisService.stability_experiment(unit_model, linear_drift(b=1.0, c=1.0), affine_diffusion(e=1.0),
                                                 ramp, [], strict=True)


@pytest.mark.integration
class TestAprioriBounds:
    """Test suite for the a priori estimates."""

    def test_constant_boundary(self, unit_model, minus_l, zero_g, flat):
        """Test ||A^0|| = 0 against a zero Gamma."""
        report = AnalysisService.apriori_bounds(unit_model, minus_l, zero_g, flat, unit_model.zeros(),
                                                unit_model.constant(0.1))
        checks = {c.name: c for c in report.checks}
        assert report.gamma_estimate == 0.0
        assert checks["a0_sup"].bound == 0.0
        assert report.ok

    def test_ramp_boundary(self, unit_model, minus_l, zero_g, ramp):
        """Test ||A^0|| = 1 against 3 sqrt(3) Gamma with Gamma = 2."""
        report = AnalysisService.apriori_bounds(unit_model, minus_l, zero_g, ramp, unit_model.zeros(),
                                                unit_model.constant(0.1))
        checks = {c.name: c for c in report.checks}
        assert checks["a0_sup"].measured == pytest.approx(1.0, abs=1e-8)
        assert checks["a0_sup"].bound == pytest.approx(6 * math.sqrt(3))
        assert report.ok

    def test_lipschitz_in_y(self, short_model, coupled_drift, zero_g, short_ramp):
        """Test |A(0) - A(0.1)| against sqrt(2) L / k (1 + sqrt(T)) ||y - y'||."""
        report = AnalysisService.apriori_bounds(short_model, coupled_drift, zero_g, short_ramp,
                                                short_model.zeros(), short_model.constant(0.1),
                                                perturbed=short_ramp.shifted(0.05))
        checks = {c.name: c for c in report.checks}
        assert checks["a_lipschitz"].measured == pytest.approx(0.01, abs=1e-8)
        assert checks["a_lipschitz"].bound == pytest.approx(math.sqrt(2) * 0.1 * 1.5 * 0.1)
        assert set(checks) == {"a0_sup", "a_lipschitz", "y_growth", "a_stability"}
        assert report.ok


@pytest.mark.slow
@pytest.mark.integration
class TestRefinement:
    """Test suite for the dt refinement table."""

    def test_ramp_rows(self, minus_l, zero_g):
        """Test one row per step count with Y_0 = X_0 = 0."""
        rows = AnalysisService.refinement_table(1.0, [2, 4, 8], minus_l, zero_g,
                                                lambda m: ramp_boundary(m, slope=2.0, cap=1.0))
        assert [r.steps for r in rows] == [2, 4, 8]
        assert [r.dt for r in rows] == [0.5, 0.25, 0.125]
        for row in rows:
            assert row.y0 == pytest.approx(0.0, abs=1e-8)
            assert row.a_sup == pytest.approx(1.0, abs=1e-8)
            assert row.iterations == 2
