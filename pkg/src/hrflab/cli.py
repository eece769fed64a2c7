"""Command-line entry point.

Subcommands:
  run <config>             run the flow and every enabled verification suite
  presets                  list built-in scenario presets
  verify <suite> <config>  run the flow and a single suite
  eigen <config>           eigenvalue series of the weighted operator
  kernel <config>          heat-kernel estimate and bound check only

<config> is either a path to a key = value file or a preset name.  Output
goes to --out (or $HRFLAB_OUT_DIR, default ./hrflab_out), one subdirectory
per scenario.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import harness, spectral
from .flow import FlowControls, run


def _scenario(arg: str) -> harness.Scenario:
    if os.path.exists(arg):
        return harness.load_scenario(arg)
    return harness.preset_scenario(arg)


def _print_summary(report: dict) -> None:
    flow = report.get("flow", {})
    if not flow.get("passed", False):
        print(f"flow: FAIL ({flow.get('error', 'unknown error')})")
    else:
        print(f"flow: pass ({flow['n_steps']} steps, {flow['n_rejections']} rejections)")
    for name, res in report.get("suites", {}).items():
        print(f"{name}: {'pass' if res['passed'] else 'FAIL'}")
    print(f"overall: {'pass' if report.get('overall_pass') else 'FAIL'}")


def cmd_run(args) -> int:
    scn = _scenario(args.config)
    status, report = harness.run_scenario(scn, args.out)
    _print_summary(report)
    return status


def cmd_presets(args) -> int:
    for name, desc in harness.list_presets():
        print(f"{name}: {desc}")
    return 0


def cmd_verify(args) -> int:
    scn = _scenario(args.config)
    status, report = harness.run_scenario(scn, args.out, only_suite=args.suite)
    _print_summary(report)
    return status


def _trajectory(scn: harness.Scenario):
    state0 = harness.initial_state(scn)
    return run(
        state0,
        harness.alpha_schedule(scn),
        scn["run.t_end"],
        FlowControls(dt0=scn["run.dt0"]),
        n_checkpoints=scn["run.checkpoints"],
    )


def cmd_eigen(args) -> int:
    scn = _scenario(args.config)
    traj = _trajectory(scn)
    out = harness.output_dir(scn, args.out)
    path = os.path.join(out, "eigen.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "lambda0", "residual", "iterations"])
        for t in traj.times():
            res = spectral.f_entropy_lambda0(traj.state_at(float(t)))
            writer.writerow([repr(float(t)), repr(res.lam), repr(res.residual), res.iterations])
            print(f"t = {float(t):.6g}  lambda0 = {res.lam:.10g}")
    print(f"wrote {path}")
    return 0


def cmd_kernel(args) -> int:
    scn = _scenario(args.config)
    status, report = harness.run_scenario(scn, args.out, only_suite="kernel")
    _print_summary(report)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hrflab",
        description="simulation and verification laboratory for coupled "
        "geometric flows on symmetry-reduced closed manifolds",
    )
    parser.add_argument("--out", default=None, help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the flow and all enabled suites")
    p.add_argument("config", help="config file path or preset name")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("presets", help="list built-in presets")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("verify", help="run a single verification suite")
    p.add_argument("suite", choices=harness.SUITE_NAMES)
    p.add_argument("config", help="config file path or preset name")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eigen", help="eigenvalue series along the flow")
    p.add_argument("config", help="config file path or preset name")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("kernel", help="heat-kernel estimate and bound check")
    p.add_argument("config", help="config file path or preset name")
    p.set_defaults(func=cmd_kernel)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
