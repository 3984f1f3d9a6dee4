"""Command line interface.

Subcommands::

    lipcodesign validate <config>
    lipcodesign codesign <config> --out <dir>
    lipcodesign simulate <config> --gains <report.json|inline> --out <dir>

Exit codes: 0 ok, 1 assumption failure, 2 malformed config, 3 no
convergence, 4 infeasible initial synthesis, 5 simulation divergence.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import configio
from .codesign import run_codesign, solve_design_certificate
from .exceptions import CodesignError, DivergenceError, InfeasibleSynthesisError
from .plant import Transform, check_assumptions
from .simulate import integrate, verify_trace_bound

log = logging.getLogger("lipcodesign")

EXIT_OK = 0
EXIT_ASSUMPTION = 1
EXIT_PARSE = 2
EXIT_NOT_CONVERGED = 3
EXIT_INFEASIBLE = 4
EXIT_DIVERGED = 5


def _load(path):
    try:
        raw = configio.load_config(path)
        return raw, configio.build_plant(raw)
    except OSError as exc:
        raise configio.ConfigError(str(exc), str(path)) from exc


def _print_assumptions(report, out):
    for c in report.checks:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[c.passed]
        print(f"{c.name:10s} {status}  {c.detail}", file=out)
        if c.witness is not None:
            x1, x2 = c.witness
            print(f"{'':10s}       witness x1={np.array2string(x1)} x2={np.array2string(x2)}",
                  file=out)
    if report.R is not None:
        print(f"R = {np.array2string(report.R)}", file=out)


def cmd_validate(args, out=sys.stdout):
    raw, plant = _load(args.config)
    d = raw.get("codesign", {}).get("initial_d")
    report = check_assumptions(plant, probe_count=args.probes, rng=args.seed,
                               d=None if d is None else np.array(d, dtype=float))
    _print_assumptions(report, out)
    return EXIT_OK if report.all_passed else EXIT_ASSUMPTION


def cmd_codesign(args, out=sys.stdout):
    raw, plant = _load(args.config)
    config = configio.build_codesign_config(raw)
    assumptions = check_assumptions(plant, rng=args.seed)
    if not assumptions.all_passed:
        _print_assumptions(assumptions, out)
        return EXIT_ASSUMPTION

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        report = run_codesign(plant, config)
    except InfeasibleSynthesisError as exc:
        print(f"infeasible: {exc}", file=out)
        doc = {"status": "infeasible", "message": str(exc),
               "delta0": exc.delta0, "threshold": exc.threshold}
        (outdir / "report.json").write_text(configio.dumps(doc))
        return EXIT_INFEASIBLE

    doc = configio.report_to_dict(report, plant)
    (outdir / "report.json").write_text(configio.dumps(doc))
    init = report.initial_original
    print(f"delta0 = {init.delta0:.6g}  threshold = {init.threshold:.6g}  "
          f"feasible = {init.feasible}", file=out)
    if report.initial_transformed is not None:
        tb = report.initial_transformed
        print(f"transformed delta0 = {tb.delta0:.6g}  threshold = {tb.threshold:.6g}  "
              f"feasible = {tb.feasible}", file=out)
    print(f"iterations = {len(report.iterations)}  status = {doc['status']}  "
          f"({report.message})", file=out)
    print(f"d = {np.array2string(report.final_d)}", file=out)
    print(f"K_bar = {np.array2string(report.final_K_bar)}", file=out)
    print(f"K = {np.array2string(report.final_K_original)}", file=out)
    print(f"improvement = {report.improvement_percent:.3f}%", file=out)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _gains_from(args, raw, plant):
    """``(d, K, certificate_context)`` from a report file or the config."""
    sim = raw.get("simulate", {})
    if args.gains == "inline":
        if "gains" not in sim:
            raise configio.ConfigError("inline gains requested but not given", "simulate/gains")
        K = np.array(sim["gains"], dtype=float)
        if "d" in sim:
            d = np.array(sim["d"], dtype=float)
        elif "initial_d" in raw.get("codesign", {}):
            d = np.array(raw["codesign"]["initial_d"], dtype=float)
        else:
            d = 0.5 * (plant.d_lower + plant.d_upper)
        return d, K, None
    try:
        doc = json.loads(Path(args.gains).read_text())
        d = np.array(doc["final_d"], dtype=float)
        K = np.array(doc["final_K_original"], dtype=float)
        ctx = (Transform.from_matrix(doc["transform"]),
               np.array(doc["final_K_bar"], dtype=float), float(doc["mu"]))
    except (OSError, ValueError, KeyError) as exc:
        raise configio.ConfigError(f"cannot read gains: {exc}", str(args.gains)) from exc
    return d, K, ctx


def _bound_summary(plant, d, K, ctx, dt):
    """Certificate bound check, in transformed coordinates when a report is given."""
    if ctx is None:
        target, K_t, mu = plant, K, 1.0
    else:
        T, K_bar, mu = ctx
        target, K_t = plant.transform(T), K_bar
    try:
        P = solve_design_certificate(target, d, K_t, mu)
    except CodesignError as exc:
        return {"certified": False, "message": str(exc)}
    rep = verify_trace_bound(target, d, K_t, P, mu, dt=dt)
    return {"certified": True, "mu": mu, "bound": rep.bound, "cost": rep.total_cost,
            "costs": list(rep.costs), "passed": rep.passed,
            "truncated": list(rep.truncated), "message": rep.message}


def cmd_simulate(args, out=sys.stdout):
    raw, plant = _load(args.config)
    sim = raw.get("simulate", {})
    d, K, ctx = _gains_from(args, raw, plant)
    if K.shape != (plant.n_u, plant.n_x):
        raise configio.ConfigError(f"gain must have shape {(plant.n_u, plant.n_x)}", "gains")
    x0 = np.array(sim.get("x0", np.zeros(plant.n_x)), dtype=float)
    t_end = float(sim.get("t_end", 10.0))
    dt = float(sim.get("dt", 1e-3))
    signal = configio.build_disturbance(sim)

    header = (["t"] + [f"x{i + 1}" for i in range(plant.n_x)]
              + [f"u{i + 1}" for i in range(plant.n_u)]
              + [f"z{i + 1}" for i in range(plant.n_z)]
              + [f"w{i + 1}" for i in range(plant.n_w)])
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    if t_end > 0:
        try:
            traj = integrate(plant, d, K, x0, signal, t_end, dt)
        except DivergenceError as exc:
            print(f"diverged at t = {exc.time:g}", file=out)
            return EXIT_DIVERGED
        rows = np.hstack([traj.times[:, None], traj.states, traj.inputs, traj.outputs,
                          traj.disturbance])
    with open(outdir / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])

    summary = _bound_summary(plant, d, K, ctx, dt)
    (outdir / "bound_summary.json").write_text(configio.dumps(summary))
    print(f"wrote {len(rows)} samples to {outdir / 'trajectory.csv'}", file=out)
    if summary.get("certified"):
        print(f"output energy {summary['cost']:.6g} <= bound {summary['bound']:.6g}: "
              f"{summary['passed']}", file=out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lipcodesign",
        description="Plant/controller co-design for Lipschitz nonlinear systems.")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized self-tests (Lipschitz probes)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check plant assumptions")
    p.add_argument("config")
    p.add_argument("--probes", type=int, default=200)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("codesign", help="run the co-design optimization")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codesign)

    p = sub.add_parser("simulate", help="simulate the closed loop")
    p.add_argument("config")
    p.add_argument("--gains", required=True, help="path to report.json or 'inline'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out=out)
    except configio.ConfigError as exc:
        print(f"config error: {exc}", file=out)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
