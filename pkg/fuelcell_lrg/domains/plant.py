"""Reduced-order PEM fuel cell electro-thermal model.

Polarization curve, lumped stack heat balance, the bilinear coolant-flow
model derived from it, and its linearization to the first-order plant

    dx/dt = (1/J) * (-B x + u),   x = T_st - T_st0,  u = w_c - w_c0.

Temperatures in the empirical voltage formulas are in degrees Celsius and the
current density is in mA/cm^2 (1000 * I / A_cell).
"""

import logging
import math
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.error_handling import DomainError, InvariantViolationError, handle_model_errors


logger = logging.getLogger(__name__)


class FuelCellParams(BaseModel):
    """Empirical and physical constants of the stack (Ballard MK5 fit)."""

    model_config = ConfigDict(frozen=True)

    # Activation, ohmic and transport overpotential coefficients
    alpha1: float = Field(4.01e-2, ge=0, description="V")
    alpha2: float = Field(-1.40e-4, description="V/degC")
    beta1: float = Field(4.77e-4, ge=0, description="kOhm cm^2")
    beta2: float = Field(-3.32e-6, description="kOhm cm^2/degC")
    theta1: float = Field(1.1e-4, ge=0, description="V")
    theta2: float = Field(-1.2e-6, description="V/degC")
    n: float = Field(8.0e-3, gt=0, description="cm^2/mA")
    E0: float = Field(1.05, gt=0, description="open circuit voltage, V")

    # Stack
    A_cell: float = Field(232.0, gt=0, description="cm^2")
    N_cell: int = Field(36, gt=0)
    mC: float = Field(35.0, gt=0, description="m_st * Cp_st, kJ/degC")

    # Hydrogen and coolant
    F: float = Field(96485.0, gt=0, description="C/mol")
    MM_H2: float = Field(2.016, gt=0, description="g/mol")
    dH: float = Field(143.0, gt=0, description="kJ/g")
    eta_I: float = Field(0.98, gt=0, le=1)
    Cp_c: float = Field(4.184, gt=0, description="kJ/(kg degC)")


class OperatingPoint(BaseModel):
    """Load current and stack temperature the model is linearized around."""

    model_config = ConfigDict(frozen=True)

    T_st0: float = Field(70.0, description="stack temperature, degC")
    I0: float = Field(100.0, gt=0, description="load current, A")
    T_in: float = Field(67.0, description="coolant inlet temperature, degC")

    @model_validator(mode="after")
    def _inlet_is_cooler(self) -> "OperatingPoint":
        if not self.T_st0 > self.T_in:
            raise ValueError(
                f"T_st0 ({self.T_st0} degC) must exceed T_in ({self.T_in} degC)"
            )
        return self


class LinearPlant(BaseModel):
    """First-order plant J dx/dt = -B x + u."""

    model_config = ConfigDict(frozen=True)

    J: float = Field(lt=0)
    B: float


class ThermalCoefficients(NamedTuple):
    A0: float  # degC/s
    A1: float  # 1/s
    B0: float  # 1/kg


class HeatFlows(BaseModel):
    """Terms of the lumped stack heat balance."""

    model_config = ConfigDict(frozen=True)

    m_h2: float = Field(description="hydrogen consumption, g/s")
    q_gen: float = Field(description="reaction heat, kW")
    p_elec: float = Field(description="electrical power, kW")
    q_cool: float = Field(description="heat removed by coolant, kW")
    dT_dt: float = Field(description="stack temperature rate, degC/s")


def _current_density(p: FuelCellParams, I: float) -> float:
    if not I > 0:
        raise DomainError(f"Load current must be positive, got {I} A", {"I": I})
    return 1000.0 * I / p.A_cell


def cell_voltage(p: FuelCellParams, I: float, T: float) -> float:
    """Cell voltage E0 - V_act - V_ohm - V_trans at current I (A), temperature T (degC)."""
    i = _current_density(p, I)
    v_act = (p.alpha1 + p.alpha2 * T) * math.log(i)
    v_ohm = (p.beta1 + p.beta2 * T) * i
    v_trans = (p.theta1 + p.theta2 * T) * math.exp(p.n * i)
    return p.E0 - v_act - v_ohm - v_trans


def polarization_curve(p: FuelCellParams, currents: Sequence[float], T: float) -> np.ndarray:
    """Vectorized cell voltage over an array of load currents."""
    I = np.asarray(currents, dtype=float)
    if np.any(I <= 0):
        raise DomainError("Load currents must all be positive")
    i = 1000.0 * I / p.A_cell
    return (
        p.E0
        - (p.alpha1 + p.alpha2 * T) * np.log(i)
        - (p.beta1 + p.beta2 * T) * i
        - (p.theta1 + p.theta2 * T) * np.exp(p.n * i)
    )


def thermal_coefficients(p: FuelCellParams, I: float) -> ThermalCoefficients:
    """A0(I), A1(I) and B0 of the bilinear model."""
    i = _current_density(p, I)
    log_i = math.log(i)
    exp_i = math.exp(p.n * i)
    scale = p.N_cell * I / p.mC

    reaction = p.eta_I * p.MM_H2 * p.dH / (2.0 * p.F)
    losses = (-p.E0 + p.alpha1 * log_i + p.beta1 * i + p.theta1 * exp_i) / 1000.0
    A0 = scale * (reaction + losses)
    A1 = scale / 1000.0 * (p.alpha2 * log_i + p.beta2 * i + p.theta2 * exp_i)
    B0 = p.Cp_c / p.mC
    return ThermalCoefficients(A0, A1, B0)


def bilinear_derivative(p: FuelCellParams, T: float, w_c: float, I: float, T_in: float) -> float:
    """dT/dt = A0(I) + A1(I) T - w_c B0 (T - T_in)."""
    A0, A1, B0 = thermal_coefficients(p, I)
    return A0 + A1 * T - w_c * B0 * (T - T_in)


def hydrogen_mass_flow(p: FuelCellParams, I: float) -> float:
    """Hydrogen consumption in g/s from Faraday's law."""
    if not I > 0:
        raise DomainError(f"Load current must be positive, got {I} A", {"I": I})
    return p.eta_I * p.N_cell * p.MM_H2 * I / (2.0 * p.F)


def heat_balance(p: FuelCellParams, T: float, w_c: float, I: float, T_in: float) -> HeatFlows:
    """Unsimplified heat balance; dT_dt agrees with bilinear_derivative."""
    m_h2 = hydrogen_mass_flow(p, I)
    q_gen = m_h2 * p.dH
    p_elec = p.N_cell * cell_voltage(p, I, T) * I / 1000.0
    q_cool = w_c * p.Cp_c * (T - T_in)
    return HeatFlows(
        m_h2=m_h2,
        q_gen=q_gen,
        p_elec=p_elec,
        q_cool=q_cool,
        dT_dt=(q_gen - p_elec - q_cool) / p.mC,
    )


def nominal_coolant_flow(p: FuelCellParams, op: OperatingPoint) -> float:
    """Coolant flow (kg/s) that holds the stack at T_st0 under load I0."""
    span = op.T_st0 - op.T_in
    if span == 0:
        raise DomainError(
            "Nominal coolant flow is undefined when T_st0 equals T_in",
            {"T_st0": op.T_st0, "T_in": op.T_in},
        )
    A0, A1, B0 = thermal_coefficients(p, op.I0)
    return (A0 + A1 * op.T_st0) / (B0 * span)


@handle_model_errors
def linearize(p: FuelCellParams, op: OperatingPoint) -> LinearPlant:
    """Linearize the bilinear model around (T_st0, w_c0)."""
    _, A1, B0 = thermal_coefficients(p, op.I0)
    w_c0 = nominal_coolant_flow(p, op)
    span = op.T_st0 - op.T_in
    plant = LinearPlant(J=-1.0 / (B0 * span), B=-(B0 * w_c0 - A1) / (B0 * span))
    logger.debug(f"Linearized at {op}: w_c0={w_c0:.6g} kg/s, J={plant.J:.6g}, B={plant.B:.6g}")
    return plant


@handle_model_errors
def perturb(plant: LinearPlant, rel_J: float, rel_B: float) -> LinearPlant:
    """Scale J and B by (1 + rel_J) and (1 + rel_B)."""
    J = plant.J * (1.0 + rel_J)
    if not J < 0:
        raise InvariantViolationError(
            f"Perturbation rel_J={rel_J} flips the sign of J ({plant.J} -> {J})",
            {"J": plant.J, "rel_J": rel_J},
        )
    return LinearPlant(J=J, B=plant.B * (1.0 + rel_B))
