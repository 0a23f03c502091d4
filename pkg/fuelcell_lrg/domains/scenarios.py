"""Scenario-level operations shared by the CLI and the MCP server."""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..config import RuntimeSettings, settings
from ..scenario.output import prepare_out_dir, write_comparison, write_run
from ..scenario.schema import (
    ScenarioFile,
    apply_overrides,
    parse_scenario,
    read_scenario_mapping,
)
from ..utils.error_handling import format_success_response, handle_model_errors
from .plant import (
    FuelCellParams,
    cell_voltage,
    linearize,
    nominal_coolant_flow,
    polarization_curve,
    thermal_coefficients,
)
from .refmodel import RefModelGains, dc_gain, solve_lyapunov, system_matrices
from .sim import compare_runs, run_scenario


logger = logging.getLogger(__name__)


def exit_status(governed: bool, safety_ok: bool) -> int:
    """0 unless a governed run broke the safety bound (2)."""
    return 2 if governed and not safety_ok else 0


class ScenarioOperations:
    """Linearize, simulate and compare scenario files."""

    def __init__(self, runtime: Optional[RuntimeSettings] = None):
        self.settings = runtime or settings

    def load(self, config_path: Optional[str] = None, overrides: Sequence[str] = ()) -> ScenarioFile:
        """Read a scenario file and apply ``section.key=value`` overrides.

        Args:
            config_path: Scenario YAML; the configured default when omitted
            overrides: Assignments applied on top of the file

        Returns:
            Validated scenario
        """
        path = Path(config_path or self.settings.default_scenario)
        data = read_scenario_mapping(path)
        if overrides:
            data = apply_overrides(data, overrides)
        scenario = parse_scenario(data)
        logger.info(f"Loaded scenario {path} with {len(overrides)} override(s)")
        return scenario

    def linearize(self, config_path: Optional[str] = None, overrides: Sequence[str] = ()) -> Dict[str, Any]:
        """Derived model quantities at the scenario's operating point."""
        scenario = self.load(config_path, overrides)
        cfg = scenario.to_sim_config()
        p, op = cfg.params, cfg.operating_point

        plant = linearize(p, op)
        coeffs = thermal_coefficients(p, op.I0)
        gains = RefModelGains(K=cfg.K, lam=cfg.lam, J_nom=plant.J, B_nom=plant.B)
        ss = system_matrices(gains)
        P = solve_lyapunov(ss, np.array(cfg.Q, dtype=float))

        data = {
            "operating_point": op.model_dump(),
            "w_c0_kg_s": nominal_coolant_flow(p, op),
            "J": plant.J,
            "B": plant.B,
            "A0_degC_s": coeffs.A0,
            "A1_per_s": coeffs.A1,
            "B0_per_kg": coeffs.B0,
            "V_cell_V": cell_voltage(p, op.I0, op.T_st0),
            "A_m": ss.A_m.tolist(),
            "b_m": ss.b_m.tolist(),
            "dc_gain": dc_gain(ss),
            "P": P.tolist(),
        }
        return format_success_response(data, "Operating point linearized")

    def simulate(
        self,
        config_path: Optional[str] = None,
        overrides: Sequence[str] = (),
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Run one scenario; writes artifacts when ``out_dir`` is given."""
        scenario = self.load(config_path, overrides)
        cfg = scenario.to_sim_config()
        if out_dir is not None:
            prepare_out_dir(out_dir)
        run = run_scenario(cfg)
        status = exit_status(cfg.governed, run.summary.safety_ok)

        data: Dict[str, Any] = {"summary": run.summary.model_dump(), "exit_status": status}
        if out_dir is not None:
            bundle = write_run(run, scenario, out_dir, status, self.settings.csv_float_format)
            data["outputs"] = bundle.model_dump(mode="json")
        return format_success_response(data, "Scenario simulated")

    def compare(
        self,
        config_path: Optional[str] = None,
        overrides: Sequence[str] = (),
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Run the governed and ungoverned variants of one scenario side by side."""
        scenario = self.load(config_path, overrides)
        cfg = scenario.to_sim_config()
        if out_dir is not None:
            prepare_out_dir(out_dir)
        governed = cfg.model_copy(update={"governed": True})
        ungoverned = cfg.model_copy(update={"governed": False})

        run_gov, run_base, comparison = compare_runs(governed, ungoverned)
        status = exit_status(True, run_gov.summary.safety_ok)

        data: Dict[str, Any] = {
            "labels": ["governed", "ungoverned"],
            "comparison": comparison.model_dump(),
            "exit_status": status,
        }
        if out_dir is not None:
            bundle = write_comparison(
                [run_gov, run_base],
                ["governed", "ungoverned"],
                comparison,
                scenario,
                out_dir,
                status,
                self.settings.csv_float_format,
            )
            data["outputs"] = bundle.model_dump(mode="json")
        return format_success_response(data, "Scenarios compared")

    @handle_model_errors
    def cell_voltage(
        self,
        current_A: float,
        temperature_degC: float,
        params: Optional[Dict[str, float]] = None,
    ) -> Dict[str, Any]:
        """Cell and stack voltage at one load current and stack temperature."""
        p = FuelCellParams(**(params or {}))
        v_cell = float(polarization_curve(p, [current_A], temperature_degC)[0])
        data = {
            "current_A": current_A,
            "temperature_degC": temperature_degC,
            "V_cell_V": v_cell,
            "V_stack_V": p.N_cell * v_cell,
        }
        return format_success_response(data, "Cell voltage evaluated")
