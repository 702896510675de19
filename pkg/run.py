#!/usr/bin/env python3
from __future__ import annotations

import argparse
import pathlib
import sys

import wdnse.commands
import wdnse.commands.compare
import wdnse.commands.estimate
import wdnse.commands.simulate
import wdnse.types
from wdnse import __version__
from wdnse.oracle import DEFAULT_STARTS


def get_command(args: argparse.Namespace) -> wdnse.commands.Base:
    match args.command_name:
        case "estimate":
            cfg = wdnse.commands.estimate.Command.config_from_args(
                args.threshold, args.max_iter, args.step, args.accel,
                args.base, args.objective, args.horizon)
            return wdnse.commands.estimate.Command(
                args.network, args.measurements, args.out, cfg, args.truth,
                args.debug)
        case "simulate":
            return wdnse.commands.simulate.Command(
                args.network, args.measurements, args.out, args.seed,
                args.starts, args.debug)
        case "compare":
            return wdnse.commands.compare.Command(
                args.estimate, args.truth, args.out, args.debug)
        case _:
            raise ValueError(f"Unknown command name: {args.command_name}")


PARSER = argparse.ArgumentParser(
    prog="WDN State Estimation",
    description="Estimates heads and flows of a water distribution network "
                "from head difference measurements.",
    formatter_class=argparse.ArgumentDefaultsHelpFormatter)

PARSER.add_argument(
    "--version",
    action="version",
    version=f"%(prog)s {__version__}")
PARSER.add_argument("--debug", action="store_true", default=False)
PARSER.set_defaults(command_name="")

SUBPARSERS = PARSER.add_subparsers(required=True)

ESTIMATE_PARSER = SUBPARSERS.add_parser(
    "estimate",
    formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    help="Run the successive linear estimator and write state.json, "
         "trace.csv and report.json.")
ESTIMATE_PARSER.add_argument(
    "--network",
    type=pathlib.Path,
    required=True,
    help="Path to an EPANET .inp network file.")
ESTIMATE_PARSER.add_argument(
    "--measurements",
    type=pathlib.Path,
    required=True,
    help="Path to a JSON file of head difference measurements.")
ESTIMATE_PARSER.add_argument(
    "--threshold",
    type=float,
    default=1e-4,
    help="Stop once consecutive states differ by less than this (2-norm).")
ESTIMATE_PARSER.add_argument(
    "--max-iter",
    type=int,
    default=100,
    help="Give up after this many iterations.")
ESTIMATE_PARSER.add_argument(
    "--step",
    type=int,
    default=4,
    help="Extrapolate the iterate every this many iterations.")
ESTIMATE_PARSER.add_argument(
    "--accel",
    type=float,
    default=3.0,
    help="Extrapolation gain; 0 disables extrapolation.")
ESTIMATE_PARSER.add_argument(
    "--base",
    type=float,
    default=1.001,
    help="Base of the exponential variable change, must exceed 1.")
ESTIMATE_PARSER.add_argument(
    "--objective",
    choices=[k.value for k in wdnse.types.ObjectiveKind],
    default=wdnse.types.ObjectiveKind.WEIGHTED_LEAST_SQUARES.value,
    help="Weighted least squares (QP) or weighted absolute error (LP).")
ESTIMATE_PARSER.add_argument(
    "--horizon",
    type=int,
    default=1,
    help="Number of hydraulic time steps estimated together.")
ESTIMATE_PARSER.add_argument(
    "--truth",
    type=pathlib.Path,
    default=None,
    help="State file (truth.json or state.json); when given, the distance "
         "of every iterate to it is written to reference.csv.")
ESTIMATE_PARSER.add_argument(
    "--out",
    type=pathlib.Path,
    required=True,
    help="Directory the output files are written to.")
ESTIMATE_PARSER.set_defaults(command_name="estimate")

SIMULATE_PARSER = SUBPARSERS.add_parser(
    "simulate",
    formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    help="Solve the exact network equations and write truth.json.")
SIMULATE_PARSER.add_argument(
    "--network",
    type=pathlib.Path,
    required=True,
    help="Path to an EPANET .inp network file.")
SIMULATE_PARSER.add_argument(
    "--measurements",
    type=pathlib.Path,
    default=None,
    help="Optional measurement file. Fixed heads and demands are always "
         "used; if it holds measurements, a multi-start nonlinear estimate "
         "replaces the plain hydraulic solve.")
SIMULATE_PARSER.add_argument(
    "--seed",
    type=int,
    default=None,
    help="Seed for the multi-start estimate. Falls back to the WDN_SEED "
         "environment variable, then to 0.")
SIMULATE_PARSER.add_argument(
    "--starts",
    type=int,
    default=DEFAULT_STARTS,
    help="Number of random starts of the nonlinear estimate.")
SIMULATE_PARSER.add_argument(
    "--out",
    type=pathlib.Path,
    required=True,
    help="Directory the output files are written to.")
SIMULATE_PARSER.set_defaults(command_name="simulate")

COMPARE_PARSER = SUBPARSERS.add_parser(
    "compare",
    formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    help="Compare an estimate to a reference state and write compare.csv.")
COMPARE_PARSER.add_argument(
    "estimate",
    type=pathlib.Path,
    help="Path to a state.json written by 'estimate'.")
COMPARE_PARSER.add_argument(
    "truth",
    type=pathlib.Path,
    help="Path to a truth.json written by 'simulate'.")
COMPARE_PARSER.add_argument(
    "--out",
    type=pathlib.Path,
    default=None,
    help="Directory for compare.csv. Defaults to the estimate's directory.")
COMPARE_PARSER.set_defaults(command_name="compare")


try:
    ARGS = PARSER.parse_args()
    command = get_command(ARGS)
    command.validate()
    RESULT = command.execute()
    print(command.format(RESULT))
except ValueError as e:
    print(f"Invalid argument: {e}", file=sys.stderr)
    sys.exit(wdnse.commands.EXIT_INPUT_ERROR)
sys.exit(RESULT.exit_code)
