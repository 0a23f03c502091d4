"""Run artifacts: records CSV, summary JSON and the resolved scenario echo."""

import logging
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel

from ..domains.sim import CSV_COLUMNS, CSV_SCHEMA_VERSION, Comparison, RunResult, records_frame
from ..utils.error_handling import OutputError
from .schema import ScenarioFile, write_scenario


logger = logging.getLogger(__name__)

RESOLVED_SCENARIO_NAME = "scenario_resolved.yaml"


class OutputBundle(BaseModel):
    """Files written for one command and its exit status."""

    records_csv: List[Path]
    summary_json: Path
    scenario_yaml: Path
    exit_status: int


class RunReport(BaseModel):
    csv_schema_version: int = CSV_SCHEMA_VERSION
    csv_columns: List[str] = CSV_COLUMNS
    records_csv: str
    summary: dict


class ComparisonReport(BaseModel):
    csv_schema_version: int = CSV_SCHEMA_VERSION
    labels: List[str]
    records_csv: List[str]
    comparison: Comparison


def prepare_out_dir(out_dir: Union[str, Path]) -> Path:
    """Create ``out_dir`` if needed; OutputError if it cannot be written."""
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        marker = path / ".write_check"
        marker.touch()
        marker.unlink()
    except OSError as e:
        raise OutputError(f"Output directory {path} is not writable: {e}", {"out_dir": str(path)})
    return path


def write_records(run: RunResult, path: Path, float_format: Optional[str] = None) -> Path:
    """One row per integration step, columns in SimRecord field order."""
    try:
        records_frame(run.records).to_csv(
            path, index=False, float_format=float_format, lineterminator="\n"
        )
    except OSError as e:
        raise OutputError(f"Cannot write records to {path}: {e}", {"path": str(path)})
    logger.info(f"Wrote {len(run.records)} records to {path}")
    return path


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}", {"path": str(path)})
    return path


def write_run(
    run: RunResult,
    scenario: ScenarioFile,
    out_dir: Union[str, Path],
    exit_status: int,
    float_format: Optional[str] = None,
) -> OutputBundle:
    """Write records.csv, summary.json and the resolved scenario."""
    out = prepare_out_dir(out_dir)
    csv_path = write_records(run, out / "records.csv", float_format)
    report = RunReport(records_csv=csv_path.name, summary=run.summary.model_dump())
    summary_path = _write_text(out / "summary.json", report.model_dump_json(indent=2))
    scenario_path = write_scenario(scenario, out / RESOLVED_SCENARIO_NAME)
    return OutputBundle(
        records_csv=[csv_path],
        summary_json=summary_path,
        scenario_yaml=scenario_path,
        exit_status=exit_status,
    )


def write_comparison(
    runs: List[RunResult],
    labels: List[str],
    comparison: Comparison,
    scenario: ScenarioFile,
    out_dir: Union[str, Path],
    exit_status: int,
    float_format: Optional[str] = None,
) -> OutputBundle:
    """Write one records CSV per labelled run plus comparison.json."""
    out = prepare_out_dir(out_dir)
    csv_paths = [
        write_records(run, out / f"{label}_records.csv", float_format)
        for run, label in zip(runs, labels)
    ]
    report = ComparisonReport(
        labels=labels, records_csv=[p.name for p in csv_paths], comparison=comparison
    )
    summary_path = _write_text(out / "comparison.json", report.model_dump_json(indent=2))
    scenario_path = write_scenario(scenario, out / RESOLVED_SCENARIO_NAME)
    return OutputBundle(
        records_csv=csv_paths,
        summary_json=summary_path,
        scenario_yaml=scenario_path,
        exit_status=exit_status,
    )
