"""MCP server exposing the fuel cell model and scenario runs as tools."""

import logging
from functools import wraps
from typing import Any, Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from .config import settings
from .domains.scenarios import ScenarioOperations
from .utils.error_handling import FuelCellControlError, format_error_response


# Configure logging
logging.basicConfig(level=getattr(logging, settings.log_level))
logger = logging.getLogger(__name__)

# Initialize MCP server
app = FastMCP(name=settings.server_name)

scenarios: Optional[ScenarioOperations] = None


def initialize_operations():
    """Create the scenario operations used by every tool."""
    global scenarios

    try:
        scenarios = ScenarioOperations(settings)
        logger.info(f"{settings.server_name} {settings.server_version} initialized")
    except Exception as e:
        logger.error(f"Failed to initialize scenario operations: {str(e)}")
        raise


def handle_operation_error(func):
    """Decorator to handle operation errors and convert to MCP format."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FuelCellControlError as e:
            logger.error(f"{e.error_code} in {func.__name__}: {e.message}")
            return format_error_response(e)
        except Exception as e:
            logger.error(f"Unexpected error in {func.__name__}: {str(e)}")
            error = FuelCellControlError(f"Operation failed: {str(e)}")
            return format_error_response(error)

    return wrapper


def _operations() -> ScenarioOperations:
    if scenarios is None:
        initialize_operations()
    return scenarios


@app.tool()
@handle_operation_error
def linearize_operating_point(
    config_path: Optional[str] = None, overrides: Optional[List[str]] = None
) -> Dict[str, Any]:
    """Linearize the stack thermal model at a scenario's operating point.

    Args:
        config_path: Scenario YAML path (server default when omitted)
        overrides: section.key=value assignments, e.g. ["plant.t_in_degC=64"]
    """
    return _operations().linearize(config_path, overrides or [])


@app.tool()
@handle_operation_error
def simulate_scenario(
    config_path: Optional[str] = None,
    overrides: Optional[List[str]] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """Run a closed-loop scenario and return its safety/convergence summary.

    Args:
        config_path: Scenario YAML path (server default when omitted)
        overrides: section.key=value assignments, e.g. ["sim.governed=false"]
        out_dir: Directory for records.csv and summary.json (nothing written when omitted)
    """
    return _operations().simulate(config_path, overrides or [], out_dir)


@app.tool()
@handle_operation_error
def compare_scenarios(
    config_path: Optional[str] = None,
    overrides: Optional[List[str]] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, Any]:
    """Run governed and ungoverned variants of a scenario and compare them.

    Args:
        config_path: Scenario YAML path (server default when omitted)
        overrides: section.key=value assignments
        out_dir: Directory for both record CSVs and comparison.json
    """
    return _operations().compare(config_path, overrides or [], out_dir)


@app.tool()
@handle_operation_error
def evaluate_cell_voltage(
    current_A: float, temperature_degC: float, params: Optional[Dict[str, float]] = None
) -> Dict[str, Any]:
    """Cell voltage from the polarization curve.

    Args:
        current_A: Load current in A (positive)
        temperature_degC: Stack temperature in degC
        params: Optional stack parameter overrides, e.g. {"E0": 1.04}
    """
    return _operations().cell_voltage(current_A, temperature_degC, params)


def main():
    """Main entry point for the fuel cell LRG MCP server."""
    initialize_operations()
    app.run(transport="stdio")


if __name__ == "__main__":
    main()
