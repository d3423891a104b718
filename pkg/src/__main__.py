"""
Main entry point for the PVBat-Sizer application.
"""

import argparse
import sys

from src.cli import commands

# flag dest -> dotted configuration key
OVERRIDE_FLAGS = {
    "output_dir": "output_dir",
    "load_csv": "profiles.load_csv",
    "pv_csv": "profiles.pv_csv",
    "dt_hours": "profiles.dt_hours",
    "resample": "profiles.resample_factor",
    "c_pv": "costs.c_pv",
    "c_battery": "costs.c_battery",
    "c_dcdc": "costs.c_dcdc",
    "c_inv": "costs.c_inv",
    "c_grid_withdraw": "costs.c_grid_withdraw",
    "c_grid_inject": "costs.c_grid_inject",
    "horizon_years": "costs.horizon_years",
    "annualize": "costs.annualize",
    "converter_model": "formulation.converter_model",
    "battery_model": "formulation.battery_model",
    "linear_efficiency_basis": "formulation.linear_efficiency_basis",
    "tol_feas": "solver.tol_feas",
    "tol_gap": "solver.tol_gap",
    "max_iter": "solver.max_iter",
    "cap_epsilon": "solver.cap_epsilon",
}


def _add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="Scenario file (YAML)")
    parser.add_argument("--output-dir", help="Directory for results")
    parser.add_argument("--load-csv", help="Load profile CSV (W)")
    parser.add_argument("--pv-csv", help="Normalized PV profile CSV (W/Wp)")
    parser.add_argument("--dt-hours", type=float, help="Profile resolution in hours")
    parser.add_argument("--resample", type=int, help="Average profiles over blocks of this many samples")
    for flag in ("c-pv", "c-battery", "c-dcdc", "c-inv", "c-grid-withdraw", "c-grid-inject",
                 "horizon-years"):
        parser.add_argument(f"--{flag}", type=float)
    parser.add_argument("--annualize", action=argparse.BooleanOptionalAction, default=None,
                        help="Scale the operational cost of a partial-year profile to a year")
    parser.add_argument("--converter-model", choices=["convex", "linear"])
    parser.add_argument("--battery-model", choices=["convex", "linear"])
    parser.add_argument("--linear-efficiency-basis", choices=["best_point", "rated"])
    parser.add_argument("--tol-feas", type=float)
    parser.add_argument("--tol-gap", type=float)
    parser.add_argument("--max-iter", type=int)
    parser.add_argument("--cap-epsilon", type=float)
    parser.add_argument("--lossless", action="store_true", help="Treat every component as ideal")


def _overrides(args: argparse.Namespace):
    return {key: getattr(args, dest, None) for dest, key in OVERRIDE_FLAGS.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="PVBat-Sizer: PV, battery and converter sizing")
    parser.add_argument("--log-level", help="Log level (default: PVBAT_LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    optimize_parser = subparsers.add_parser("optimize", help="Size and operate the system")
    _add_scenario_arguments(optimize_parser)
    optimize_parser.add_argument("--duration-curves", action="store_true",
                                 help="Also write battery duration curves")

    compare_parser = subparsers.add_parser("compare", help="Compare the four loss formulations")
    _add_scenario_arguments(compare_parser)
    compare_parser.add_argument("--formulations", help="Comma-separated labels, e.g. CC-CB,LC-LB")

    synth_parser = subparsers.add_parser("synth", help="Write synthetic load and PV profiles")
    synth_parser.add_argument("--output-dir", default=".", help="Directory for load.csv and pv.csv")
    synth_parser.add_argument("--steps", type=int, default=35040)
    synth_parser.add_argument("--dt", type=float, default=0.25, help="Resolution in hours")
    synth_parser.add_argument("--load-kwh", type=float, default=2774.0, help="Annual load in kWh")
    synth_parser.add_argument("--pv-wh-per-wp", type=float, default=1020.0, help="Annual PV yield in Wh/Wp")
    synth_parser.add_argument("--start-day", type=int, default=0)
    synth_parser.add_argument("--seed", type=int, default=0)

    verify_parser = subparsers.add_parser("verify", help="Re-verify saved optimization results")
    verify_parser.add_argument("output_dir", help="Directory written by optimize")
    return parser


def main():
    """
    Main entry point function.

    Parses command line arguments and runs the selected command.
    """
    parser = build_parser()
    args = parser.parse_args()

    if args.command == "optimize":
        code = commands.cmd_optimize(args.config, _overrides(args), lossless=args.lossless,
                                     duration_curves=args.duration_curves, log_level=args.log_level)
    elif args.command == "compare":
        labels = [s.strip() for s in args.formulations.split(",")] if args.formulations else None
        code = commands.cmd_compare(args.config, _overrides(args), formulations=labels,
                                    lossless=args.lossless, log_level=args.log_level)
    elif args.command == "synth":
        code = commands.cmd_synth(args.output_dir, steps=args.steps, dt_hours=args.dt,
                                  load_kwh=args.load_kwh, pv_wh_per_wp=args.pv_wh_per_wp,
                                  start_day=args.start_day, seed=args.seed, log_level=args.log_level)
    elif args.command == "verify":
        code = commands.cmd_verify(args.output_dir, log_level=args.log_level)
    else:
        # If no command specified, show help
        parser.print_help()
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
