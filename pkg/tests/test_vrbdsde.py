"""
Picard solver tests for the variant reflected BDSDE.
"""
import numpy as np
import pytest

from tests.helpers import build_model
from vrlab.exceptions import ConfigError, ContractionViolated, NoConvergence
from vrlab.models.coefficients import FrozenCoefficients
from vrlab.models.lattice import AdaptedField
from vrlab.models.presets import affine_diffusion, linear_drift, make_boundary, ramp_boundary
from vrlab.services.skorohod_service import SkorohodService
from vrlab.services.vrbdsde_service import VrbdsdeService


@pytest.fixture
def short_ramp(short_model):
    """X_t = min(2t, 1) on [0, 0.25]."""
    return ramp_boundary(short_model, slope=2.0, cap=1.0)


@pytest.mark.unit
class TestFreeze:
    """Test suite for choosing the lattice that carries frozen coefficients."""

    def test_uncoupled_stays_on_nodes(self, unit_model, minus_l, zero_g):
        """Test that y is ignored when neither coefficient depends on it."""
        y = unit_model.history().zeros()
        assert VrbdsdeService.freeze(unit_model, minus_l, zero_g, y).lattice is unit_model

    def test_node_field(self, unit_model, coupled_drift, zero_g):
        """Test that a node field freezes on the recombining lattice."""
        coeffs = VrbdsdeService.freeze(unit_model, coupled_drift, zero_g, unit_model.constant(1.0))
        assert coeffs.lattice is unit_model

    def test_history_field_without_spread(self, unit_model, coupled_drift, zero_g):
        """Test that a history field agreeing across each node is projected down."""
        history = unit_model.history()
        y = history.lift(unit_model.field_from(lambda t, w, s: w))
        coeffs = VrbdsdeService.freeze(unit_model, coupled_drift, zero_g, y)
        assert coeffs.lattice is unit_model
        np.testing.assert_allclose(coeffs.y[3], unit_model.w_value(3))

    def test_path_dependent_field(self, unit_model, coupled_drift, zero_g):
        """Test that a genuinely path-dependent y keeps the history lattice."""
        history = unit_model.history()
        y = AdaptedField(tuple(history.prefix(i).astype(float) for i in range(unit_model.steps + 1)))
        coeffs = VrbdsdeService.freeze(unit_model, coupled_drift, zero_g, y)
        assert coeffs.lattice is history


@pytest.mark.unit
class TestPhiMap:
    """Test suite for one application of the Picard map."""

    def test_constant_boundary(self, unit_model, minus_l, zero_g, flat):
        """Test Phi(0) = X for a constant obstacle."""
        sol = VrbdsdeService.phi_map(unit_model, minus_l, zero_g, flat, unit_model.zeros())
        for i in range(unit_model.steps + 1):
            np.testing.assert_allclose(sol.Y[i], 0.7, atol=1e-8)

    def test_uncoupled_is_constant_map(self, unit_model, minus_l, zero_g, ramp):
        """Test that Phi does not depend on y when L_y = 0."""
        a = VrbdsdeService.phi_map(unit_model, minus_l, zero_g, ramp, unit_model.zeros())
        b = VrbdsdeService.phi_map(unit_model, minus_l, zero_g, ramp, unit_model.constant(5.0))
        assert a.Y.sup_diff(b.Y) == 0.0

    def test_coupled_at_zero(self, unit_model, coupled_drift, zero_g, ramp):
        """Test f = 0.1 y - l at y = 0 reduces to the ramp solution."""
        sol = VrbdsdeService.phi_map(unit_model, coupled_drift, zero_g, ramp, unit_model.zeros())
        for i, t in enumerate(unit_model.times):
            np.testing.assert_allclose(sol.A[i], 1.0, atol=1e-8)
            np.testing.assert_allclose(sol.Y[i], t, atol=1e-8)

    def test_initial_guess_policies(self, unit_model, ramp):
        """Test the boundary and zero starting points."""
        assert VrbdsdeService.initial_guess(unit_model, ramp, "boundary") is ramp.values
        assert VrbdsdeService.initial_guess(unit_model, ramp, "zero").sup_norm() == 0.0
        with pytest.raises(ConfigError, match="y0_policy"):
            VrbdsdeService.initial_guess(unit_model, ramp, "random")


@pytest.mark.integration
class TestSolve:
    """Test suite for the Picard iteration."""

    def test_uncoupled_converges_in_two(self, unit_model, minus_l, zero_g, ramp):
        """Test that L_y = 0 reaches its fixed point after one confirming step."""
        sol = VrbdsdeService.solve(unit_model, minus_l, zero_g, ramp)
        direct = SkorohodService.solve_skorohod(unit_model, FrozenCoefficients(unit_model, minus_l, zero_g), ramp)
        assert sol.iterations == 2
        assert sol.residual_history[-1] == 0.0
        assert sol.Y.sup_diff(direct.Y) == 0.0
        assert sol.contraction_constant == 0.0
        assert sol.certified
        assert sol.passed

    def test_coupled_converges(self, short_model, coupled_drift, coupled_diffusion, short_ramp):
        """Test f = 0.1 y - l, g = 0.1 y on T = 0.25, N = 6: ratios below c + 0.01 within 15 iterations."""
        sol = VrbdsdeService.solve(short_model, coupled_drift, coupled_diffusion, short_ramp,
                                   tol_fp=1e-9, tol_l=1e-13)
        c = sol.contraction_constant
        assert sol.certified
        assert c == pytest.approx(0.2268, abs=1e-4)
        assert sol.residual_history[-1] < 1e-9
        assert sol.iterations <= 15
        assert sol.ratios
        assert all(ratio <= c + 0.01 for ratio in sol.ratios)
        assert sol.passed

    @pytest.mark.parametrize("y0_policy", ["boundary", "zero"])
    def test_ratios_from_each_start(self, short_model, coupled_drift, coupled_diffusion, short_ramp, y0_policy):
        """Test the contraction ratios from both starting points."""
        sol = VrbdsdeService.solve(short_model, coupled_drift, coupled_diffusion, short_ramp,
                                   tol_fp=1e-9, y0_policy=y0_policy, tol_l=1e-13)
        assert sol.iterations <= 15
        assert max(sol.ratios) <= sol.contraction_constant + 0.01

    def test_unique_fixed_point(self, short_model, coupled_drift, coupled_diffusion, short_ramp):
        """Test that both starting policies agree within 2 tol_fp / (1 - c)."""
        a = VrbdsdeService.solve(short_model, coupled_drift, coupled_diffusion, short_ramp,
                                 tol_fp=1e-9, y0_policy="boundary", tol_l=1e-13)
        b = VrbdsdeService.solve(short_model, coupled_drift, coupled_diffusion, short_ramp,
                                 tol_fp=1e-9, y0_policy="zero", tol_l=1e-13)
        c = a.contraction_constant
        assert a.Y.sup_diff(b.Y) <= 2 * 1e-9 / (1 - c)
        for i in range(short_model.steps + 1):
            assert np.all(a.Y[i] <= a.skorohod.X[i] + 1e-8)

    def test_contraction_violated(self, unit_model, ramp):
        """Test that f = y - l, g = y on [0, 1] is refused in strict mode."""
        f, g = linear_drift(b=1.0, c=1.0), affine_diffusion(e=1.0)
        with pytest.raises(ContractionViolated, match="contraction condition") as exc:
            VrbdsdeService.solve(unit_model, f, g, ramp, strict=True)
        assert exc.value.constant == pytest.approx(9.071, abs=1e-3)

    def test_exploration_mode_runs_uncertified(self, unit_model, ramp):
        """Test that exploration mode iterates and reports non-convergence."""
        f, g = linear_drift(b=1.0, c=1.0), affine_diffusion(e=1.0)
        with pytest.raises(NoConvergence) as exc:
            VrbdsdeService.solve(unit_model, f, g, ramp, strict=False, max_iter=2, tol_fp=1e-300)
        assert len(exc.value.residual_history) == 2

    def test_ratios(self, unit_model, minus_l, zero_g, ramp):
        """Test the residual ratio diagnostic."""
        sol = VrbdsdeService.solve(unit_model, minus_l, zero_g, ramp)
        assert sol.ratios == [0.0]


@pytest.mark.integration
class TestOneNoiseReduction:
    """Test suite for g = 0 with an obstacle that ignores the backward noise."""

    @pytest.mark.parametrize("drift", ["minus_l", "coupled_drift"])
    def test_solution_ignores_backward_noise(self, drift, zero_g, request):
        """Test that Y and A are constant across backward-noise suffixes at every node."""
        model = build_model(0.5, 5)
        X = make_boundary(model, "lattice_functional", level=0.3, drift=0.5, vol=0.4)
        f = request.getfixturevalue(drift)
        sol = VrbdsdeService.solve(model, f, zero_g, X)
        fields = sol.skorohod.node_fields()
        for name in ("Y", "A"):
            field = fields[name]
            for i in field.time_indices:
                by_suffix = np.reshape(field[i], (i + 1, 2 ** (model.steps - i)))
                assert np.ptp(by_suffix, axis=1).max() <= 1e-12, f"{name} at time {i}"
