"""Runtime configuration for the fuel cell LRG tools."""

from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class RuntimeSettings(BaseSettings):
    """Process-level settings; scenario physics lives in scenario files."""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="FUELCELL_LRG_")

    # Scenario used when a command is given no config path
    default_scenario: str = "scenarios/governed_step.yaml"

    # Output
    output_dir: str = "runs"
    csv_float_format: Optional[str] = None

    # MCP Server settings
    server_name: str = "Fuel Cell LRG Server"
    server_version: str = "0.1.0"

    # Logging
    log_level: str = "INFO"


# Global settings instance
settings = RuntimeSettings()
