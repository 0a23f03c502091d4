"""Unit-tagged scenario keys and their canonical field names.

Scenario files spell the unit into every key (``t_st0_degC``, ``dt_s``).
Temperatures may also be given in kelvin (``t_st0_K``); this module maps such
keys onto the canonical Celsius field and converts the value.
"""

from enum import Enum
from typing import Any, Dict, Tuple

from .error_handling import ConfigurationError


KELVIN_OFFSET = 273.15


class Unit(str, Enum):
    """Units that may appear as a key suffix."""

    DEG_C = "degC"
    KELVIN = "K"


# Absolute temperatures accept either unit. Temperature *deviations*
# (x_bar_degC, x_d_degC, ...) are offsets and only accept degC.
ABSOLUTE_TEMPERATURE_FIELDS = ("t_st0", "t_in")


def split_unit_key(key: str) -> Tuple[str, str]:
    """Split ``t_st0_degC`` into (``t_st0``, ``degC``).

    Keys without a recognised unit suffix come back unchanged with an empty unit.
    """
    for unit in Unit:
        suffix = f"_{unit.value}"
        if key.endswith(suffix):
            return key[: -len(suffix)], unit.value
    return key, ""


def to_celsius(value: float, unit: str) -> float:
    """Convert an absolute temperature to Celsius."""
    if unit == Unit.KELVIN:
        return float(value) - KELVIN_OFFSET
    if unit == Unit.DEG_C:
        return float(value)
    raise ConfigurationError(f"Unsupported temperature unit: {unit!r}")


def normalize_temperature_keys(section: Dict[str, Any], section_name: str) -> Dict[str, Any]:
    """Rewrite kelvin-tagged absolute temperatures into their degC keys.

    Args:
        section: Raw key/value mapping of one scenario section
        section_name: Section name used in error messages

    Returns:
        New mapping where every absolute temperature uses the ``_degC`` key

    Raises:
        ConfigurationError: If the same quantity is given in both units
    """
    normalized: Dict[str, Any] = {}
    seen: Dict[str, str] = {}

    for key, value in section.items():
        base, unit = split_unit_key(key)
        if base in ABSOLUTE_TEMPERATURE_FIELDS and unit:
            if base in seen:
                raise ConfigurationError(
                    f"{section_name}.{base} given as both {seen[base]} and {key}"
                )
            seen[base] = key
            normalized[f"{base}_{Unit.DEG_C.value}"] = to_celsius(value, unit)
        else:
            normalized[key] = value

    return normalized
