"""Command-line front end: ``fuelcell-lrg simulate|linearize|compare``.

Exit codes: 0 success, 1 configuration/runtime error, 2 governed run broke
the safety bound.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from .config import settings
from .domains.scenarios import ScenarioOperations
from .utils.error_handling import FuelCellControlError


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fuelcell-lrg",
        description="Safe adaptive temperature control of a PEM fuel cell stack",
        epilog=(
            "Runs are deterministic: no random numbers are drawn, so a scenario "
            "and its overrides always reproduce the same records."
        ),
    )
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", nargs="?", default=None, help="Scenario YAML (default: %s)" % settings.default_scenario)
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override a scenario key; repeatable",
        )

    simulate = sub.add_parser("simulate", help="Run one scenario and write records + summary")
    scenario_args(simulate)
    simulate.add_argument("--out-dir", default=settings.output_dir, help="Output directory (default: %(default)s)")
    simulate.add_argument("--no-governor", action="store_true", help="Baseline adaptive run, x_tilde_d = x_d")
    simulate.add_argument("--bilinear-plant", action="store_true", help="Simulate the bilinear plant")
    simulate.add_argument("--delta", type=float, default=None, help="Safety monitor delta, degC")

    linearize = sub.add_parser("linearize", help="Print the linearized model and reference-model matrices")
    scenario_args(linearize)

    compare = sub.add_parser("compare", help="Run governed and ungoverned variants side by side")
    scenario_args(compare)
    compare.add_argument("--out-dir", default=settings.output_dir, help="Output directory (default: %(default)s)")
    compare.add_argument("--bilinear-plant", action="store_true", help="Simulate the bilinear plant")
    compare.add_argument("--delta", type=float, default=None, help="Safety monitor delta, degC")

    return parser


def _flag_overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if getattr(args, "no_governor", False):
        overrides.append("sim.governed=false")
    if getattr(args, "bilinear_plant", False):
        overrides.append("plant.model=bilinear")
    if getattr(args, "delta", None) is not None:
        overrides.append(f"sim.delta_degC={args.delta!r}")
    return overrides


def _print_summary(summary: Dict[str, Any], prefix: str = "") -> None:
    for key, value in summary.items():
        print(f"{prefix}{key} = {value}")


def cmd_simulate(ops: ScenarioOperations, args: argparse.Namespace) -> int:
    result = ops.simulate(args.config, _flag_overrides(args), args.out_dir)["data"]
    _print_summary(result["summary"])
    for path in result["outputs"]["records_csv"]:
        print(f"records: {path}")
    print(f"summary: {result['outputs']['summary_json']}")
    return result["exit_status"]


def cmd_linearize(ops: ScenarioOperations, args: argparse.Namespace) -> int:
    data = ops.linearize(args.config, _flag_overrides(args))["data"]
    op = data["operating_point"]
    print(f"operating point: T_st0 = {op['T_st0']} degC, I0 = {op['I0']} A, T_in = {op['T_in']} degC")
    print(f"w_c0 = {data['w_c0_kg_s']:.6f} kg/s")
    print(f"J = {data['J']:.6f} kg/degC")
    print(f"B = {data['B']:.6f} kg/(s degC)")
    print(f"A0 = {data['A0_degC_s']:.6g} degC/s, A1 = {data['A1_per_s']:.6g} 1/s, B0 = {data['B0_per_kg']:.6g} 1/kg")
    print(f"V_cell = {data['V_cell_V']:.6f} V")
    print(f"A_m = {data['A_m']}")
    print(f"b_m = {data['b_m']}")
    print(f"dc gain = {data['dc_gain']:.12f}")
    print(f"P = {data['P']}")
    return EXIT_OK


def cmd_compare(ops: ScenarioOperations, args: argparse.Namespace) -> int:
    result = ops.compare(args.config, _flag_overrides(args), args.out_dir)["data"]
    comparison = result["comparison"]
    for label, key in zip(result["labels"], ("summary_a", "summary_b")):
        print(f"[{label}]")
        _print_summary(comparison[key], prefix="  ")
    print(f"max_abs_x_delta = {comparison['max_abs_x_delta']}")
    print(f"summary: {result['outputs']['summary_json']}")
    return result["exit_status"]


COMMANDS = {
    "simulate": cmd_simulate,
    "linearize": cmd_linearize,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the ``fuelcell-lrg`` console script."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))

    ops = ScenarioOperations()
    try:
        return COMMANDS[args.command](ops, args)
    except FuelCellControlError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(f"{e.error_code}: {e.message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
