"""Command-line interface: simulate, optimize, check-grad, export-plot.

Exit status is 0 on success, 1 for usage and validation problems and 2 when
a solver fails or a gradient check exceeds its threshold.  ``CCMA_LOG_LEVEL``
sets log verbosity (default ``WARNING``).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .export import (
    export_trajectory,
    plot_tables,
    read_controls,
    read_design,
    write_controls,
    write_design,
)
from .forward import SolverError
from .scenario import ScenarioError, load_scenario_file, resolve_scenario, shipped_scenarios
from .sensitivity import SensitivityError
from .trajopt import CONCURRENT, STANDALONE, OptVariable, check_gradients, optimize

log = logging.getLogger("ccma")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2


class UsageError(Exception):
    def __init__(self, message, parser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for solver failures here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}", self)


def _load(args):
    sc = load_scenario_file(resolve_scenario(args.scenario))
    controls = sc.zero_controls()
    if getattr(args, "controls", None):
        controls = read_controls(Path(args.controls).read_text())
        if controls.shape != sc.control_shape:
            raise ScenarioError(f"{args.controls}: controls have shape {controls.shape}, "
                                f"expected {sc.control_shape}")
    dp = sc.dp0
    if getattr(args, "design", None):
        dp = read_design(sc.topology, Path(args.design).read_text())
    return sc, controls, dp


def _write(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _goal_errors(sc, pose):
    if sc.objective.goal is None:
        return None
    g = np.asarray(sc.objective.goal.target)
    return {
        "O_ee": 0.5 * float(np.sum((pose - g) ** 2)),
        "position_error": float(np.linalg.norm(pose[:3] - g[:3])),
        "orientation_error": float(np.abs(pose[3:] - g[3:]).max()),
        "goal": g.tolist(),
    }


def cmd_simulate(args):
    sc, controls, dp = _load(args)
    traj = sc.simulate(controls, dp)
    _write(args.output, export_trajectory(sc, traj))
    if not traj.converged:
        log.warning("some steps ended above the solver tolerance; see the E_r column")
    return EXIT_OK


def cmd_optimize(args):
    sc, controls, dp = _load(args)
    opts = sc.optimizer
    if args.max_iter is not None:
        opts = dataclasses.replace(opts, max_iter=args.max_iter)
    mode = args.mode or opts.mode
    if args.controls is None and sc.init_controls is not None:
        controls = sc.init_controls
    t0 = time.perf_counter()
    report = optimize(sc, mode=mode, init=OptVariable(controls, dp), opts=opts)
    runtime = time.perf_counter() - t0
    out = Path(args.out_dir)
    stem = args.prefix or sc.name
    _write(out / f"{stem}_controls.csv", write_controls(sc.topology, report.variable.u))
    _write(out / f"{stem}_trajectory.csv", export_trajectory(sc, report.trajectory))
    final_dp = report.variable.dp if report.variable.dp is not None else dp
    if sc.topology.n_dp:
        _write(out / f"{stem}_design.csv", write_design(sc.topology, final_dp))
    pose = report.final_pose(sc)
    doc = {
        "scenario": sc.name,
        "mode": mode,
        "reason": report.reason,
        "iterations": report.iterations,
        "evaluations": report.evaluations,
        "objective": report.objective,
        "breakdown": report.breakdown,
        "task_values": report.values,
        "residual_energy_sum": report.residual_sum,
        "residual_energy_max": float(report.trajectory.residual_energies.max(initial=0.0)),
        "grad_norm": report.grad_norm,
        "final_pose": pose.tolist(),
        "design": np.asarray(final_dp).tolist(),
        "runtime_s": runtime,
        "backend": kernels.BACKEND,
    }
    errs = _goal_errors(sc, pose)
    if errs:
        doc.update(errs)
    _write(out / f"{stem}_report.json", json.dumps(doc, indent=2) + "\n")
    summary = f"{sc.name}: {report.reason} after {report.iterations} iterations, objective {report.objective:.6e}"
    if errs:
        summary += f", O_ee {errs['O_ee']:.3e}"
    print(summary)
    return EXIT_OK


def cmd_check_grad(args):
    sc, controls, dp = _load(args)
    if args.controls is None and sc.init_controls is not None:
        controls = sc.init_controls
    mode = args.mode or sc.optimizer.mode
    res = check_gradients(sc, OptVariable(controls, dp), h=args.h, mode=mode)
    ok = res.passed(args.rtol, args.atol)
    print(f"{sc.name} ({mode}, h={args.h:g}): {res.summary()}")
    if args.verbose_coords:
        for i, (a, n) in enumerate(zip(res.analytic, res.numeric)):
            print(f"  {i:4d} analytic {a: .12e} fd {n: .12e} rel {res.rel_error[i]:.2e}")
    print("PASS" if ok else "FAIL", f"(rtol {args.rtol:g}, atol {args.atol:g})")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_export_plot(args):
    sc, controls, dp = _load(args)
    traj = sc.simulate(controls, dp)
    ee, bases, legend = plot_tables(sc, traj)
    out = Path(args.out_dir)
    _write(out / f"{sc.name}_ee.csv", ee)
    _write(out / f"{sc.name}_bases.csv", bases)
    print(f"bases: {legend}")
    return EXIT_OK


def cmd_list(args):
    for name in shipped_scenarios():
        print(name)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ccma", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None,
                   help="reserved; every command is deterministic and ignores it")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def scenario_cmd(name, helptext, func):
        s = sub.add_parser(name, help=helptext, description=helptext)
        s.add_argument("scenario", help="scenario file or bundled scenario name (see `ccma list`)")
        s.add_argument("--controls", help="control table (step, u...) to use instead of zeros")
        s.add_argument("--design", help="design table (body.point columns) to use instead of the scenario's")
        s.set_defaults(func=func)
        return s

    s = scenario_cmd("simulate", "roll out controls and write the trajectory table", cmd_simulate)
    s.add_argument("-o", "--output", default="-", help="output file (default stdout)")

    s = scenario_cmd("optimize", "optimize controls (and design in concurrent mode)", cmd_optimize)
    s.add_argument("--mode", choices=(STANDALONE, CONCURRENT))
    s.add_argument("--max-iter", type=int)
    s.add_argument("--out-dir", default=".", help="directory for controls, trajectory and report")
    s.add_argument("--prefix", help="file name prefix (default scenario name)")

    s = scenario_cmd("check-grad", "compare analytic and central-difference gradients", cmd_check_grad)
    s.add_argument("--h", type=float, default=1e-6, help="finite-difference step")
    s.add_argument("--rtol", type=float, default=1e-4)
    s.add_argument("--atol", type=float, default=1e-7)
    s.add_argument("--mode", choices=(STANDALONE, CONCURRENT))
    s.add_argument("--verbose-coords", action="store_true", help="print every coordinate")

    s = scenario_cmd("export-plot", "write end-effector pose and base path tables", cmd_export_plot)
    s.add_argument("--out-dir", default=".")

    s = sub.add_parser("list", help="list bundled scenarios")
    s.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    level = os.environ.get("CCMA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("ccma: error: a command is required", parser)
    except UsageError as exc:
        if exc.parser is parser:
            parser.print_help(sys.stderr)
        else:
            exc.parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        log.info("--seed %d ignored: the pipeline is deterministic", args.seed)
    try:
        return args.func(args)
    except (SolverError, SensitivityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
