"""Scenario file schema, loader and echo.

A scenario is a YAML document with four sections (``plant``, ``controller``,
``governor``, ``sim``). Every key carries its unit; unknown keys are rejected.
See docs/scenario-reference.md for the full key list.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..domains.governor import GovernorConfig
from ..domains.plant import FuelCellParams, OperatingPoint
from ..domains.sim import PlantModel, SetpointStep, SimConfig
from ..utils.error_handling import ConfigurationError, OutputError, handle_model_errors
from ..utils.units import normalize_temperature_keys


logger = logging.getLogger(__name__)

SECTIONS = ("plant", "controller", "governor", "sim")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class PlantSection(_Section):
    t_st0_degC: float = 70.0
    i0_A: float = 100.0
    t_in_degC: float = 67.0
    rel_J: float = 0.11
    rel_B: float = 0.22
    model: PlantModel = PlantModel.LINEAR
    params: Dict[str, float] = Field(default_factory=dict, description="FuelCellParams overrides")

    @field_validator("params")
    @classmethod
    def _known_params(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = sorted(set(value) - set(FuelCellParams.model_fields))
        if unknown:
            raise ValueError(f"unknown stack parameters: {', '.join(unknown)}")
        return value


class ControllerSection(_Section):
    K: float = -1.0
    lam: float = Field(0.3, alias="lambda")
    gamma1: float = Field(5.0, description="magnitude; sign(J_nom) is applied")
    gamma2: float = Field(1.0, description="magnitude; sign(J_nom) is applied")
    J_hat0: Optional[float] = None
    B_hat0: Optional[float] = None


class GovernorSection(_Section):
    x_bar_degC: float = 0.5
    eps0_degC: float = 0.055
    k_eps_per_degC: float = 5.0
    Delta: float = 1.0
    x_bar_d_degC: Optional[float] = None
    sample_period_s: float = 0.1
    Q: List[List[float]] = Field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])


class ScheduleEntry(_Section):
    t_start_s: float
    x_d_degC: float


class SimSection(_Section):
    duration_s: float = 100.0
    dt_s: float = 0.01
    x_d_degC: float = -0.35
    setpoint_schedule: Optional[List[ScheduleEntry]] = None
    x0_degC: float = 0.0
    x_m0_degC: float = 0.0
    e_Im0_degC_s: float = 0.0
    e_int0_degC_s: float = 0.0
    x_tilde_d0_degC: float = 0.0
    governed: bool = True
    delta_degC: Optional[float] = None
    sanity_bound: float = 100.0
    settle_tolerance_degC: float = 0.01
    convergence_window_s: float = 10.0


class ScenarioFile(_Section):
    """Validated scenario document."""

    plant: PlantSection = Field(default_factory=PlantSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    governor: GovernorSection = Field(default_factory=GovernorSection)
    sim: SimSection = Field(default_factory=SimSection)

    @handle_model_errors
    def to_sim_config(self) -> SimConfig:
        """Build the domain configuration; raises ConfigurationError on broken invariants."""
        plant, ctrl, gov, sim = self.plant, self.controller, self.governor, self.sim
        schedule = None
        if sim.setpoint_schedule is not None:
            schedule = tuple(
                SetpointStep(t_start=entry.t_start_s, x_d=entry.x_d_degC)
                for entry in sim.setpoint_schedule
            )
        return SimConfig(
            params=FuelCellParams(**plant.params),
            operating_point=OperatingPoint(T_st0=plant.t_st0_degC, I0=plant.i0_A, T_in=plant.t_in_degC),
            rel_J=plant.rel_J,
            rel_B=plant.rel_B,
            plant_model=plant.model,
            K=ctrl.K,
            lam=ctrl.lam,
            gamma1=abs(ctrl.gamma1),
            gamma2=abs(ctrl.gamma2),
            J_hat0=ctrl.J_hat0,
            B_hat0=ctrl.B_hat0,
            governor=GovernorConfig(
                x_bar=gov.x_bar_degC,
                eps0=gov.eps0_degC,
                k_eps=gov.k_eps_per_degC,
                Delta=gov.Delta,
                x_bar_d=gov.x_bar_d_degC,
                T_s=gov.sample_period_s,
            ),
            Q=gov.Q,
            governed=sim.governed,
            duration=sim.duration_s,
            dt=sim.dt_s,
            x_d=sim.x_d_degC,
            setpoint_schedule=schedule,
            x0=sim.x0_degC,
            x_m0=sim.x_m0_degC,
            e_Im0=sim.e_Im0_degC_s,
            e_int0=sim.e_int0_degC_s,
            x_tilde_d0=sim.x_tilde_d0_degC,
            delta=sim.delta_degC,
            sanity_bound=sim.sanity_bound,
            settle_tolerance=sim.settle_tolerance_degC,
            convergence_window=sim.convergence_window_s,
        )


@handle_model_errors
def parse_scenario(data: Optional[Dict[str, Any]]) -> ScenarioFile:
    """Validate a raw scenario mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Scenario must be a mapping of sections, got {type(data).__name__}")

    data = dict(data)
    plant = data.get("plant")
    if isinstance(plant, dict):
        data["plant"] = normalize_temperature_keys(plant, "plant")

    return ScenarioFile.model_validate(data)


def load_scenario(path: Union[str, Path]) -> ScenarioFile:
    """Read and validate a scenario YAML file."""
    path = Path(path)
    logger.info(f"Loading scenario {path}")
    return parse_scenario(read_scenario_mapping(path))


def read_scenario_mapping(path: Union[str, Path]) -> Dict[str, Any]:
    """Raw YAML mapping of a scenario file, before validation."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Scenario file not found: {path}", {"path": str(path)})
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Malformed scenario file {path}: {e}", {"path": str(path)})
    except OSError as e:
        raise ConfigurationError(f"Cannot read scenario file {path}: {e}", {"path": str(path)})
    return {} if data is None else data


def dump_scenario(scenario: ScenarioFile) -> Dict[str, Any]:
    """Plain mapping of a scenario; ``parse_scenario`` of it gives the same scenario."""
    return scenario.model_dump(mode="json", by_alias=True, exclude_none=True)


def write_scenario(scenario: ScenarioFile, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            yaml.safe_dump(dump_scenario(scenario), handle, sort_keys=False)
    except OSError as e:
        raise OutputError(f"Cannot write scenario to {path}: {e}", {"path": str(path)})
    return path


def apply_overrides(data: Optional[Dict[str, Any]], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``section.key=value`` assignments to a raw scenario mapping.

    Values are parsed as YAML scalars, so ``sim.governed=false`` and
    ``governor.eps0_degC=0.06`` come through typed. Nested keys are allowed
    (``plant.params.alpha1=0.04``).
    """
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"Scenario must be a mapping of sections, got {type(data).__name__}")
    result = copy.deepcopy(data) if data else {}
    for override in overrides:
        path, sep, raw = override.partition("=")
        keys = [key.strip() for key in path.split(".")]
        if not sep or len(keys) < 2 or not all(keys):
            raise ConfigurationError(
                f"Override must look like section.key=value, got {override!r}"
            )
        if keys[0] not in SECTIONS:
            raise ConfigurationError(
                f"Unknown scenario section {keys[0]!r} in override {override!r}",
                {"sections": list(SECTIONS)},
            )
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse override value in {override!r}: {e}")

        target = result
        for key in keys[:-1]:
            node = target.get(key)
            if node is None:
                node = target[key] = {}
            elif not isinstance(node, dict):
                raise ConfigurationError(f"Override {override!r} descends into a non-mapping key {key!r}")
            target = node
        target[keys[-1]] = value
        logger.debug(f"Override {path} = {value!r}")
    return result
