"""Tests for the PEM fuel cell thermal model."""

import numpy as np
import pytest

from fuelcell_lrg.domains.plant import (
    FuelCellParams,
    LinearPlant,
    OperatingPoint,
    bilinear_derivative,
    cell_voltage,
    heat_balance,
    hydrogen_mass_flow,
    linearize,
    nominal_coolant_flow,
    perturb,
    polarization_curve,
    thermal_coefficients,
)
from fuelcell_lrg.utils.error_handling import DomainError, InvariantViolationError


class TestPolarizationCurve:
    """Test the cell voltage model."""

    def setup_method(self):
        """Setup test fixtures."""
        self.params = FuelCellParams()

    def test_cell_voltage_at_operating_point(self):
        """Test cell voltage at 100 A and 70 degC."""
        assert cell_voltage(self.params, 100.0, 70.0) == pytest.approx(0.760, abs=1e-3)

    def test_open_circuit_voltage(self):
        """Test that zero overpotential coefficients give E0."""
        ideal = self.params.model_copy(update={
            "alpha1": 0.0, "alpha2": 0.0, "beta1": 0.0,
            "beta2": 0.0, "theta1": 0.0, "theta2": 0.0,
        })
        assert cell_voltage(ideal, 100.0, 70.0) == pytest.approx(1.05, abs=1e-15)

    def test_voltage_decreases_with_current(self):
        """Test the slope of the polarization curve near 100 A."""
        assert cell_voltage(self.params, 101.0, 70.0) < cell_voltage(self.params, 99.0, 70.0)

    def test_non_positive_current(self):
        """Test that the log of a non-positive current density is rejected."""
        with pytest.raises(DomainError):
            cell_voltage(self.params, 0.0, 70.0)
        with pytest.raises(DomainError):
            polarization_curve(self.params, [10.0, -1.0], 70.0)

    def test_polarization_curve_matches_scalar(self):
        """Test the vectorized curve against the scalar formula."""
        currents = [5.0, 50.0, 100.0, 150.0]
        volts = polarization_curve(self.params, currents, 65.0)
        expected = [cell_voltage(self.params, I, 65.0) for I in currents]
        np.testing.assert_allclose(volts, expected, rtol=1e-13)


class TestThermalModel:
    """Test the bilinear heat balance."""

    def setup_method(self):
        """Setup test fixtures."""
        self.params = FuelCellParams()
        self.op = OperatingPoint()

    def test_thermal_coefficients(self):
        """Test A0, A1 and B0 at 100 A."""
        A0, A1, B0 = thermal_coefficients(self.params, 100.0)
        assert B0 == pytest.approx(0.11954, rel=1e-4)
        assert A1 == pytest.approx(-2.384e-4, rel=1e-3)
        assert A0 == pytest.approx(0.0891, abs=2e-4)

    def test_B0_independent_of_current(self):
        """Test that B0 does not depend on the load current."""
        assert thermal_coefficients(self.params, 20.0).B0 == thermal_coefficients(self.params, 180.0).B0

    def test_cooling_vanishes_at_inlet_temperature(self):
        """Test that w_c has no effect when T equals T_in."""
        A0, A1, _ = thermal_coefficients(self.params, 100.0)
        for w_c in (0.0, 0.2, 1.0):
            assert bilinear_derivative(self.params, 67.0, w_c, 100.0, 67.0) == pytest.approx(A0 + A1 * 67.0, abs=1e-15)

    def test_equilibrium_at_nominal_flow(self):
        """Test that the nominal coolant flow holds T_st0."""
        w_c0 = nominal_coolant_flow(self.params, self.op)
        dT = bilinear_derivative(self.params, self.op.T_st0, w_c0, self.op.I0, self.op.T_in)
        assert abs(dT) < 1e-12

    def test_more_coolant_cools_faster(self):
        """Test dT/dt decreases with coolant flow above the inlet temperature."""
        slow = bilinear_derivative(self.params, 70.0, 0.1, 100.0, 67.0)
        fast = bilinear_derivative(self.params, 70.0, 0.3, 100.0, 67.0)
        assert fast < slow

    def test_heat_balance_matches_bilinear_model(self):
        """Test that the simplified coefficients reproduce the full balance."""
        for T, w_c, I in [(71.0, 0.1, 100.0), (65.0, 0.35, 60.0), (75.0, 0.0, 140.0)]:
            flows = heat_balance(self.params, T, w_c, I, 67.0)
            expected = bilinear_derivative(self.params, T, w_c, I, 67.0)
            assert flows.dT_dt == pytest.approx(expected, rel=1e-12, abs=1e-15)
            assert flows.q_cool == pytest.approx(w_c * self.params.Cp_c * (T - 67.0))

    def test_hydrogen_mass_flow(self):
        """Test hydrogen consumption from Faraday's law."""
        assert hydrogen_mass_flow(self.params, 100.0) == pytest.approx(0.036858, rel=1e-4)
        with pytest.raises(DomainError):
            hydrogen_mass_flow(self.params, 0.0)


class TestNominalFlow:
    """Test the nominal coolant flow."""

    def setup_method(self):
        """Setup test fixtures."""
        self.params = FuelCellParams()

    def test_nominal_flow(self):
        """Test the flow at 70 degC, 100 A, T_in = 67 degC."""
        w_c0 = nominal_coolant_flow(self.params, OperatingPoint())
        assert w_c0 == pytest.approx(0.20, abs=0.005)
        assert w_c0 == pytest.approx(0.202, abs=1e-3)

    def test_zero_numerator(self):
        """Test that A0 + A1 T_st0 = 0 gives zero flow."""
        A0, A1, _ = thermal_coefficients(self.params, 100.0)
        T_st0 = -A0 / A1
        op = OperatingPoint(T_st0=T_st0, I0=100.0, T_in=T_st0 - 3.0)
        assert nominal_coolant_flow(self.params, op) == pytest.approx(0.0, abs=1e-12)

    def test_doubling_span_halves_flow(self):
        """Test homogeneity in T_st0 - T_in."""
        narrow = nominal_coolant_flow(self.params, OperatingPoint(T_in=67.0))
        wide = nominal_coolant_flow(self.params, OperatingPoint(T_in=64.0))
        assert wide == pytest.approx(narrow / 2.0, rel=1e-12)

    def test_equal_temperatures(self):
        """Test the division by zero when T_st0 equals T_in."""
        op = OperatingPoint.model_construct(T_st0=70.0, I0=100.0, T_in=70.0)
        with pytest.raises(DomainError):
            nominal_coolant_flow(self.params, op)

    def test_operating_point_invariants(self):
        """Test that a warmer inlet and a non-positive current are rejected."""
        with pytest.raises(ValueError):
            OperatingPoint(T_st0=60.0, T_in=67.0)
        with pytest.raises(ValueError):
            OperatingPoint(I0=0.0)


class TestLinearization:
    """Test the first-order plant."""

    def setup_method(self):
        """Setup test fixtures."""
        self.params = FuelCellParams()

    def test_nominal_values(self):
        """Test J and B at the default operating point."""
        plant = linearize(self.params, OperatingPoint())
        assert plant.J == pytest.approx(-2.79, abs=0.01)
        assert plant.B == pytest.approx(-0.07, abs=0.005)
        assert plant.B == pytest.approx(-0.068, abs=1e-3)

    def test_unit_span(self):
        """Test that T_st0 - T_in = 1/B0 gives J = -1."""
        B0 = thermal_coefficients(self.params, 100.0).B0
        plant = linearize(self.params, OperatingPoint(T_st0=70.0, T_in=70.0 - 1.0 / B0))
        assert plant.J == pytest.approx(-1.0, rel=1e-12)

    def test_J_negative_over_grid(self):
        """Test J < 0 across operating points."""
        for T_st0 in (55.0, 70.0, 80.0):
            for I0 in (20.0, 100.0, 180.0):
                for span in (0.5, 3.0, 10.0):
                    plant = linearize(self.params, OperatingPoint(T_st0=T_st0, I0=I0, T_in=T_st0 - span))
                    assert plant.J < 0

    def test_linearization_residual_is_second_order(self):
        """Test that the residual of the linear model is the bilinear cross term."""
        op = OperatingPoint()
        plant = linearize(self.params, op)
        w_c0 = nominal_coolant_flow(self.params, op)

        def residual(dT, dw):
            exact = bilinear_derivative(self.params, op.T_st0 + dT, w_c0 + dw, op.I0, op.T_in)
            return abs(exact - (-plant.B * dT + dw) / plant.J)

        full = residual(0.1, 0.01)
        half = residual(0.05, 0.005)
        assert full > 0
        assert half <= 0.3 * full

    def test_invalid_parameters(self):
        """Test that parameter validation surfaces as a configuration error."""
        with pytest.raises(ValueError):
            FuelCellParams(eta_I=1.5)


class TestPerturb:
    """Test parametric uncertainty."""

    def test_no_perturbation(self):
        """Test zero relative change."""
        plant = LinearPlant(J=-2.79, B=-0.07)
        assert perturb(plant, 0.0, 0.0) == plant

    def test_scenario_perturbation(self):
        """Test +11% on J and +22% on B."""
        plant = perturb(LinearPlant(J=-2.79, B=-0.07), 0.11, 0.22)
        assert plant.J == pytest.approx(-3.0969)
        assert plant.B == pytest.approx(-0.0854)

    def test_sign_flip(self):
        """Test that J may not change sign."""
        with pytest.raises(InvariantViolationError):
            perturb(LinearPlant(J=-2.79, B=-0.07), -1.5, 0.0)

    def test_linear_plant_requires_negative_J(self):
        """Test the LinearPlant invariant."""
        with pytest.raises(ValueError):
            LinearPlant(J=1.0, B=0.0)
