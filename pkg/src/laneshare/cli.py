"""
Command-line interface for laneshare.

Usage:
    laneshare validate [--scenario NAME_OR_PATH]
    laneshare simulate [--scenario ...] --policy POLICY [--seed N] [options]
    laneshare compare  [--scenario ...] --policies P1 P2 ... [--seeds ...] [options]

Exit status is 0 on success, 1 when the scenario is invalid or a run
aborts (for compare: when any run of the matrix aborts) and 2 on usage
errors.
"""

import argparse
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from . import __version__
from .config.loader import validate_scenario
from .config.models import ExperimentSpec, LoggingConfig
from .core.errors import LaneshareError
from .core.logging import setup_logging
from .experiment import OUTPUT_ROOT_ENV, ExperimentRunner, default_output_root
from .formatting import LaneshareTemplates, LaneshareTheme
from .routing import POLICY_DESCRIPTIONS, Policy

DEFAULT_SCENARIO = "vanness"
DEFAULT_COMPARE_POLICIES = ["srp", "drp", "coordinated"]
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


def _penetration(value: str) -> float:
    try:
        p = float(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a number: {value}") from e
    if not 0 < p <= 1:
        raise argparse.ArgumentTypeError(f"penetration must be in (0, 1], got {value}")
    return p


def _policy_help() -> str:
    return "\n".join(f"  {p.value:<16} {POLICY_DESCRIPTIONS[p].splitlines()[0]}" for p in Policy)


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scenario",
        default=DEFAULT_SCENARIO,
        help=f"Scenario JSON path or bundled scenario name (default: {DEFAULT_SCENARIO})",
    )
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        help="Log level (default: $LANESHARE_LOG_LEVEL or WARNING)",
    )
    parser.add_argument(
        "--no-color", action="store_true", help="Plain output without colors or emoji"
    )


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--horizon", type=int, help="Demand horizon in seconds")
    parser.add_argument(
        "--total-demand",
        type=float,
        help="Total CAV + HV demand in veh/h used with --penetration "
        "(default: the scenario's combined rate)",
    )
    parser.add_argument(
        "--out",
        help=f"Output directory (default: under ${OUTPUT_ROOT_ENV} or ./runs)",
    )
    parser.add_argument(
        "--lambda", dest="lambda_", type=float, help="Rerouting trigger tolerance"
    )
    parser.add_argument(
        "--window-dl", type=int, help="Half-width of the DL monitoring window in seconds"
    )
    parser.add_argument(
        "--window-gpl", type=int, help="Half-width of the GPL monitoring window in seconds"
    )


def _setup_argument_parser() -> argparse.ArgumentParser:
    """Set up and configure the command-line argument parser.

    Returns:
        Configured ArgumentParser instance
    """
    parser = argparse.ArgumentParser(
        prog="laneshare",
        description="Simulate coordinated CAV routing on shared bus lanes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Policies:
{_policy_help()}

Examples:
  %(prog)s validate --scenario vanness
  %(prog)s simulate --scenario vanness --policy coordinated --seed 1 --horizon 3600
  %(prog)s simulate --policy srp-no-joint-dl --out runs/baseline
  %(prog)s compare --policies srp drp coordinated --seeds 1 2 3 4 5
  %(prog)s compare --policies srp coordinated --penetration 0.1 0.3 0.5 --total-demand 2000
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="Check a scenario document")
    _add_common_arguments(validate)

    simulate = sub.add_parser("simulate", help="Run one policy with one seed")
    _add_common_arguments(simulate)
    simulate.add_argument(
        "--policy", required=True, choices=[p.value for p in Policy], help="Routing policy"
    )
    simulate.add_argument("--seed", type=int, default=1, help="Random seed (default: 1)")
    simulate.add_argument(
        "--penetration", type=_penetration, help="CAV share of the total demand, in (0, 1]"
    )
    _add_run_arguments(simulate)

    compare = sub.add_parser("compare", help="Run a policy x seed matrix and merge the results")
    _add_common_arguments(compare)
    compare.add_argument(
        "--policies",
        nargs="+",
        choices=[p.value for p in Policy],
        default=DEFAULT_COMPARE_POLICIES,
        help=f"Policies to compare (default: {' '.join(DEFAULT_COMPARE_POLICIES)})",
    )
    compare.add_argument(
        "--seeds", nargs="+", type=int, default=[1, 2, 3, 4, 5], help="Seeds (default: 1..5)"
    )
    compare.add_argument(
        "--penetration",
        nargs="+",
        type=_penetration,
        default=[],
        help="Sweep these CAV penetration levels",
    )
    compare.add_argument("--workers", type=int, help="Worker processes (default: all cores)")
    _add_run_arguments(compare)
    return parser


def _build_spec(args: argparse.Namespace, parser: argparse.ArgumentParser) -> ExperimentSpec:
    scenario_name = os.path.splitext(os.path.basename(args.scenario))[0]
    if args.command == "simulate":
        policies = [args.policy]
        seeds = [args.seed]
        penetrations = [args.penetration] if args.penetration is not None else []
        default_out = os.path.join(
            default_output_root(), f"{scenario_name}-{args.policy}-seed{args.seed}"
        )
    else:
        policies = args.policies
        seeds = args.seeds
        penetrations = args.penetration
        default_out = os.path.join(default_output_root(), f"{scenario_name}-compare")

    try:
        return ExperimentSpec(
            scenario=args.scenario,
            policies=policies,
            seeds=seeds,
            horizon=args.horizon,
            penetrations=penetrations,
            total_demand=args.total_demand,
            out=args.out or default_out,
            lambda_=args.lambda_,
            delta_t_dl=args.window_dl,
            delta_t_gpl=args.window_gpl,
            workers=getattr(args, "workers", None),
        )
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in d['loc'])}: {d['msg']}" for d in e.errors()
        )
        parser.error(problems)
        raise


def _handle_command(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Execute the parsed subcommand and return its exit status."""
    if args.command == "validate":
        issues = validate_scenario(args.scenario)
        print(LaneshareTemplates.validation_report(args.scenario, issues))
        return 1 if issues else 0

    if args.command == "compare" and len(args.policies) < 2:
        parser.error("compare needs at least two policies")

    spec = _build_spec(args, parser)
    runner = ExperimentRunner(spec, LoggingConfig(), args.log_level)
    if args.command == "simulate":
        print(LaneshareTemplates.run_summary(runner.simulate()))
        return 0

    table = runner.compare()
    print(LaneshareTemplates.comparison(table, spec.out))
    return 1 if table.failures else 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main command-line interface."""
    parser = _setup_argument_parser()
    args = parser.parse_args(argv)

    LaneshareTheme.USE_COLORS = sys.stdout.isatty() and not args.no_color
    LaneshareTheme.USE_EMOJI = not args.no_color
    logger = setup_logging(LoggingConfig(), args.log_level)

    try:
        return _handle_command(args, parser)
    except LaneshareError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
