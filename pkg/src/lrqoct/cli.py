"""Command-line front end.

    lrqoct validate CONFIG
    lrqoct simulate CONFIG
    lrqoct gradient CONFIG --route {adjoint,response,contour,fd}
    lrqoct respond CONFIG
    lrqoct contour-check CONFIG
    lrqoct optimize CONFIG

Common flags: ``--out DIR`` (default ``.``), ``--fd-step H``,
``--format {csv,json}`` for the time-series tables.  Exit status is 0 on
success, 1 for configuration errors and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import Problem, load_config
from .contour import contour_kernel, gradient_contour
from .errors import ConfigError, QOCTError
from .gradients import Route, gradient, gradient_response, response_kernel
from .model import merit, observable_series
from .optimizer import maximize
from .propagation import build_step_propagators, propagate_forward

CONTOUR_CHECK_TOL = 1e-12


def fmt(x) -> str:
    """17 significant digits, the same text on every platform."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise FloatingPointError(f"refusing to write non-finite value {x}")
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{to_json(str(k))}: {to_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in seq) + "\n" + pad + "]"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return fmt(obj)


def write_json(path: Path, obj) -> None:
    path.write_text(to_json(obj) + "\n")


def write_table(out: Path, stem: str, columns, rows, form: str) -> Path:
    if form == "json":
        path = out / f"{stem}.json"
        write_json(path, {"columns": list(columns), "rows": [list(r) for r in rows]})
        return path
    path = out / f"{stem}.csv"
    lines = [",".join(columns)]
    lines += [",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _pulse_rows(problem: Problem, ctrl=None):
    ctrl = ctrl or problem.control
    nodes = problem.grid.nodes
    return zip(nodes, ctrl.values(nodes))


def cmd_validate(problem: Problem, args) -> dict:
    return {
        "status": "ok",
        "dim": problem.system.dim,
        "control_kind": problem.control.kind.value,
        "n_params": problem.control.n_params,
        "n_steps": problem.grid.n_steps,
        "target_kind": problem.target.kind.value,
    }


def cmd_simulate(problem: Problem, args) -> dict:
    sys_, ctrl, grid, target = problem.system, problem.control, problem.grid, problem.target
    traj = propagate_forward(sys_, ctrl, grid)
    if traj.pure:
        pops = np.abs(traj.states) ** 2
    else:
        pops = np.einsum("jii->ji", traj.states).real
    expect = observable_series(traj, target.observable)
    cols = ["t"] + [f"pop_{k}" for k in range(sys_.dim)] + ["expect_A"]
    rows = [[t, *p, e] for t, p, e in zip(grid.nodes, pops, expect)]
    write_table(args.out, "trajectory", cols, rows, args.format)
    write_table(args.out, "pulse", ["t", "epsilon"], _pulse_rows(problem), args.format)
    return {"merit": merit(sys_, ctrl, target, traj)}


def cmd_gradient(problem: Problem, args) -> dict:
    res = gradient(problem.system, problem.control, problem.grid, problem.target,
                   args.route, args.fd_step)
    payload = {"route": res.route.value, "values": res.values, "merit": res.merit_value}
    if res.route is Route.FINITE_DIFFERENCE:
        payload["fd_step"] = args.fd_step
    write_json(args.out / "gradient.json", payload)
    return payload


def cmd_respond(problem: Problem, args) -> dict:
    kernel = response_kernel(problem.system, problem.control, problem.grid,
                             problem.target.observable)
    rows = [[t, v.real, v.imag] for t, v in zip(problem.grid.nodes, kernel.values)]
    write_table(args.out, "kernel", ["tau", "re_chi", "im_chi"], rows, args.format)
    return {"nodes": problem.grid.n_nodes, "max_abs_imag": kernel.imag_defect}


def cmd_contour_check(problem: Problem, args) -> dict:
    sys_, ctrl, grid, target = problem.system, problem.control, problem.grid, problem.target
    cache = build_step_propagators(sys_, ctrl, grid)
    ck = contour_kernel(sys_, ctrl, grid, target.observable, cache)
    rk = response_kernel(sys_, ctrl, grid, target.observable, cache)
    diff = ck.branch_difference()
    cols = ["tau", "re_forward", "im_forward", "re_backward", "im_backward",
            "re_difference", "im_difference", "re_retarded", "im_retarded"]
    rows = [[t, f.real, f.imag, b.real, b.imag, d.real, d.imag, r.real, r.imag]
            for t, f, b, d, r in zip(grid.nodes, ck.forward, ck.backward, diff, rk.values)]
    write_table(args.out, "kernel", cols, rows, args.format)
    deviation = float(np.max(np.abs(diff - rk.values)))
    report = {"max_abs_deviation": deviation, "tolerance": CONTOUR_CHECK_TOL,
              "passed": deviation <= CONTOUR_CHECK_TOL}
    if not target.time_dependent_objective:
        gc = gradient_contour(sys_, ctrl, grid, target, cache)
        gr = gradient_response(sys_, ctrl, grid, target, cache)
        report["gradient_contour"] = gc.values
        report["gradient_response"] = gr.values
        report["imag_residue"] = gc.diagnostics["imag_residue"]
    write_json(args.out / "contour_check.json", report)
    if not report["passed"]:
        raise FloatingPointError(
            f"branch difference deviates from the retarded kernel by {deviation:.3e}"
        )
    return report


def cmd_optimize(problem: Problem, args) -> dict:
    cfg = problem.optimize
    if args.route is not None or args.fd_step is not None:
        if args.route is not None:
            cfg = replace(cfg, route=Route(args.route))
        if args.fd_step is not None:
            cfg = replace(cfg, fd_step=args.fd_step)
    ctrl, trace = maximize(problem.system, problem.control, problem.grid, problem.target, cfg)
    m = ctrl.n_params
    cols = ["iteration", "merit", "gradient_inf_norm", "step_size"] + [f"u_{k}" for k in range(m)]
    rows = [[r.iteration, r.merit, r.gradient_inf_norm, r.step_size, *r.params]
            for r in trace.records]
    write_table(args.out, "trace", cols, rows, args.format)
    write_table(args.out, "pulse", ["t", "epsilon"], _pulse_rows(problem, ctrl), args.format)
    summary = {
        "status": trace.status.value,
        "route": cfg.route.value,
        "iterations": trace.records[-1].iteration,
        "initial_merit": trace.records[0].merit,
        "final_merit": trace.final_merit,
        "seed": trace.seed,
        "params": ctrl.params,
    }
    write_json(args.out / "summary.json", summary)
    return summary


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "gradient": cmd_gradient,
    "respond": cmd_respond,
    "contour-check": cmd_contour_check,
    "optimize": cmd_optimize,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path)
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--fd-step", type=float, default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="lrqoct", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "gradient":
            p.add_argument("--route", choices=[r.value for r in Route], default="adjoint")
        elif name == "optimize":
            p.add_argument("--route", choices=[r.value for r in Route], default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.fd_step is not None and not args.fd_step > 0:
        print("error: --fd-step must be positive", file=sys.stderr)
        return 1
    try:
        problem = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command != "optimize" and args.fd_step is None:
        args.fd_step = problem.optimize.fd_step
    try:
        if args.command != "validate":
            args.out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](problem, args)
    except (QOCTError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    print(to_json(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
