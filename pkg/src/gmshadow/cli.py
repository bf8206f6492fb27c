"""Command-line surface: simulate, check, sweep, diagnose, oracle."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from gmshadow import diagnostics as dg
from gmshadow.experiment import (ConfigError, RunConfig, RunNotFoundError,
                                 cmd_diagnose, cmd_simulate, cmd_sweep,
                                 format_membership_table,
                                 membership_report_near)
from gmshadow.grid import RadialField, build_grid, mean_power_integral


def _parse_values(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True, help="path to config.json")
    p.add_argument("--out", required=True, help="output run directory")
    p.add_argument("--overwrite", action="store_true")


def _add_check(sub):
    p = sub.add_parser("check", help="print the trapping report nearest a time")
    p.add_argument("run_dir")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--t", type=float, help="physical time")
    group.add_argument("--s", type=float, help="similarity time")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="grid of runs over the bump amplitudes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--d0", required=True, help="comma-separated d0 values")
    p.add_argument("--d1", default="0", help="comma-separated d1 values")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--overwrite", action="store_true")


def _add_diagnose(sub):
    p = sub.add_parser("diagnose", help="recompute diagnostics for a stored run")
    p.add_argument("run_dir")


def _add_oracle(sub):
    p = sub.add_parser("oracle", help="closed-form quadrature oracles")
    kinds = p.add_subparsers(dest="oracle_kind", required=True)
    fi = kinds.add_parser("fundamental-integral",
                          help="integral of (-ln s)^n s^m over [a, b]")
    fi.add_argument("--a", type=float, required=True)
    fi.add_argument("--b", type=float, required=True)
    fi.add_argument("--n", type=float, required=True)
    fi.add_argument("--m", type=float, required=True)
    mp = kinds.add_parser("mean-power",
                          help="volume mean of a named profile's power")
    mp.add_argument("--profile", choices=("constant", "linear", "quadratic"),
                    required=True)
    mp.add_argument("--exponent", type=float, required=True)
    mp.add_argument("--dim", type=int, default=3)
    mp.add_argument("--nodes", type=int, default=1025)
    mp.add_argument("--value", type=float, default=1.0,
                    help="level of the constant profile")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmshadow",
        description="Simulate the shadow activator-inhibitor equation to "
                    "near-blowup and verify its self-similar asymptotics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_simulate, _add_check, _add_sweep, _add_diagnose, _add_oracle):
        add(sub)
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, RunNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "simulate":
        config = RunConfig.from_json(args.config)
        result = cmd_simulate(config, args.out, overwrite=args.overwrite)
        print(f"run directory: {result.run_dir}")
        outcome = result.manifest.get("outcome", {})
        print(f"status: {result.manifest['status']}; "
              f"blew_up: {outcome.get('blew_up')}; "
              f"steps: {outcome.get('steps')}")
        return 0 if result.ok else 1

    if args.command == "check":
        report = membership_report_near(args.run_dir, t=args.t, s=args.s)
        print(format_membership_table(report))
        return 0 if report["overall_pass"] else 1

    if args.command == "sweep":
        config = RunConfig.from_json(args.config)
        summary = cmd_sweep(config, _parse_values(args.d0),
                            _parse_values(args.d1), args.out,
                            workers=args.workers, overwrite=args.overwrite)
        print(f"sweep summary: {summary}")
        print(summary.read_text(), end="")
        return 0

    if args.command == "diagnose":
        diagnostics = cmd_diagnose(args.run_dir)
        print(json.dumps({
            "T_est": diagnostics["T_est"],
            "theta_star": diagnostics["theta"]["theta_star"],
            "rate_r_squared": diagnostics["rate_fit"]["r_squared"],
            "membership_all_pass": diagnostics["membership"]["all_pass"],
        }, indent=1, sort_keys=True))
        return 0

    if args.command == "oracle":
        if args.oracle_kind == "fundamental-integral":
            out = dg.fundamental_integral(args.a, args.b, args.n, args.m)
            print(json.dumps(out, indent=1, sort_keys=True))
            return 0
        grid = build_grid(1.0, args.nodes, 1.0 / (args.nodes - 1))
        profiles = {
            "constant": np.full(grid.node_count, args.value),
            "linear": grid.nodes.copy(),
            "quadratic": grid.nodes ** 2,
        }
        f = RadialField(grid, profiles[args.profile])
        measured = mean_power_integral(f, args.exponent, args.dim)
        exact = {
            "constant": args.value ** args.exponent,
            "linear": args.dim / (args.dim + args.exponent),
            "quadratic": args.dim / (args.dim + 2.0 * args.exponent),
        }[args.profile]
        print(json.dumps({"measured": measured, "exact": exact,
                          "abs_error": abs(measured - exact)},
                         indent=1, sort_keys=True))
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
