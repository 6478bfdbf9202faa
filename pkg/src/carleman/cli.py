"""Command-line front end.

    carleman simulate    --preset fig1 --N 4
    carleman converge    --preset fig1 --N-range 2:5
    carleman diagnose    --preset fig1
    carleman equivalence --ode cubic.json --N 2
    carleman quadratize  --ode cubic.json --out q.json

Exit codes: 0 success, 1 runtime or numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import models
from .diagnostics import REPORT_SCHEMA, compute_Rk0, decay_ratios, diagnose, p_measure_bound
from .engine import assemble_truncated, export_matrix_market
from .errors import CarlemanError, SpecError
from .polyode import DEFAULT_RK4_STEPS, direct_integrate, load_ode_spec, save_ode_spec, write_series_csv
from .quadratize import equivalence_check, quadratize, rhs_consistency_check
from .solver import (
    CarlemanSolution,
    assemble_block,
    default_step_count,
    measured_p,
    rk4_integrate,
    solution_error,
    solve_block,
)

log = logging.getLogger("carleman")

SMALL_PRESETS = {
    "scalar-logistic": models.scalar_logistic,
    "scalar-cubic": models.scalar_cubic,
    "linear": models.linear_ode,
}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["N", "h", "max_time_error", "eps_normalized", "p_measured", "p_bound"],
    "properties": {
        "N": {"type": "integer", "minimum": 1},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "max_time_error": {"type": "number", "minimum": 0},
        "eps_normalized": {"type": "number", "minimum": 0},
        "p_measured": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "p_bound": {"type": ["number", "null"], "minimum": 0},
    },
}

EQUIVALENCE_SCHEMA = {
    "type": "object",
    "required": ["max_discrepancy", "trials", "N", "N_prime"],
    "properties": {
        "max_discrepancy": {"type": "number", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
    },
}


class InputError(Exception):
    pass


# -- output helpers --------------------------------------------------------

def _write_json(path, data, schema):
    jsonschema.validate(data, schema)
    Path(path).write_text(json.dumps(data, indent=2))
    jsonschema.validate(json.loads(Path(path).read_text()), schema)


def _check_csv(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != header:
        raise CarlemanError(f"{path}: unexpected header {rows[0]}")
    for row in rows[1:]:
        if len(row) != len(header) or not all(math.isfinite(float(v)) for v in row):
            raise CarlemanError(f"{path}: malformed row {row}")


def _write_csv(path, times, values, names):
    write_series_csv(path, times, values, names)
    _check_csv(path, ["t", *names])


# -- ODE resolution --------------------------------------------------------

def _resolve(args):
    if bool(args.preset) == bool(args.ode):
        raise InputError("give exactly one of --preset or --ode")
    if args.ode:
        return load_ode_spec(args.ode), None
    name = args.preset
    if name in SMALL_PRESETS:
        return SMALL_PRESETS[name](), None
    try:
        params = models.preset(name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    overrides = {}
    if args.reaction:
        overrides["reaction"] = args.reaction
    if args.initial:
        overrides["initial"] = args.initial
    if args.n is not None:
        overrides["n"] = args.n
    if overrides:
        params = replace(params, **overrides)
    return models.build_reaction_diffusion(params), params


def _horizon(args, params):
    if args.T is not None:
        return args.T
    return params.T if params is not None else 1.0


# -- commands --------------------------------------------------------------

def _run_one(ode, N, T, args, out_dir, reference=None):
    """Simulate one truncation level and write solution, error and summary files."""
    if args.quadratized_cl and ode.k >= 2:
        target = quadratize(ode).ode
        label = "quadratized"
    else:
        target = ode
        label = "direct"
    system = assemble_truncated(target, N)
    if args.export_matrix:
        export_matrix_market(system, out_dir / f"A_N{N}.mtx")

    if reference is None:
        reference = direct_integrate(ode, T, args.rk4_steps)

    p_meas = p_bound = None
    if args.scheme == "euler":
        m = args.m or default_step_count(system, T)
        p = m if args.p is None else args.p
        sol = solve_block(assemble_block(system, T, m, p))
        if p > 0:
            p_meas = measured_p(sol, m, p)
            q, _ = decay_ratios(ode.x0, sol.final[: ode.n], ode.k)
            p_bound = p_measure_bound(m, p, N, q)
    else:
        m = args.m or DEFAULT_RK4_STEPS // 10
        sol = rk4_integrate(system, T, m)

    x = sol.x_extract[: sol.m + 1, : ode.n]
    times = sol.times[: sol.m + 1]
    view = CarlemanSolution(times=times, z_blocks=x, n=ode.n, m=sol.m)
    errors, eps = solution_error(view, reference)

    names = [f"x{i + 1}" for i in range(ode.n)]
    _write_csv(out_dir / f"solution_N{N}.csv", times, x, names)
    _write_csv(out_dir / f"error_N{N}.csv", times, errors, ["abs_err_l2"])
    summary = {
        "N": int(N),
        "h": float(T / sol.m),
        "max_time_error": float(errors.max()),
        "eps_normalized": float(eps),
        "p_measured": p_meas,
        "p_bound": p_bound,
        "scheme": args.scheme,
        "cl_path": label,
        "m": int(sol.m),
        "n_c": int(system.n_c),
    }
    _write_json(out_dir / f"summary_N{N}.json", summary, SUMMARY_SCHEMA)
    return summary


def cmd_simulate(args):
    ode, params = _resolve(args)
    T = _horizon(args, params)
    out = _out_dir(args)
    reference = direct_integrate(ode, T, args.rk4_steps)
    reference.write_csv(out / "reference.csv")
    summary = _run_one(ode, args.N, T, args, out, reference)
    print(json.dumps(summary, indent=2))
    return 0


def _parse_range(text):
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError:
        raise InputError(f"--N-range expects a:b, got {text!r}") from None
    if a < 1 or b < a:
        raise InputError(f"invalid N range {text!r}")
    return list(range(a, b + 1))


def cmd_converge(args):
    ode, params = _resolve(args)
    T = _horizon(args, params)
    levels = _parse_range(args.N_range) if args.N_range else [args.N]
    out = _out_dir(args)
    reference = direct_integrate(ode, T, args.rk4_steps)
    reference.write_csv(out / "reference.csv")

    rows = []
    for N in levels:
        summary = _run_one(ode, N, T, args, out, reference)
        rows.append((N, summary["max_time_error"]))
        log.info("N=%d max_time_error=%.6e", N, summary["max_time_error"])

    path = out / "convergence.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "max_time_error"])
        for N, err in rows:
            writer.writerow([N, f"{err:.17g}"])
    with open(path, newline="") as fh:
        check = list(csv.reader(fh))
    if check[0] != ["N", "max_time_error"] or len(check) != len(rows) + 1:
        raise CarlemanError(f"{path}: malformed convergence table")

    for N, err in rows:
        print(f"{N:3d}  {err:.6e}")

    errs = [e for _, e in rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    rk0 = None
    if ode.k >= 2 and ode.is_homogeneous():
        try:
            rk0 = compute_Rk0(ode)
        except CarlemanError:
            rk0 = None
    if not decreasing:
        if rk0 is not None and rk0 < 1.0:
            print(f"error: R_k^0 = {rk0:.4g} < 1 but the error is not strictly decreasing in N", file=sys.stderr)
            return 1
        print("warning: error is not strictly decreasing in N", file=sys.stderr)
    return 0


def _table(report):
    keys = ["re_lambda1", "re_lambda1_tilde", "r2", "rk", "rk0", "gamma", "q", "q_k", "s", "s_k",
            "s_quadratized", "n_c", "m", "cond_estimate", "p_measure_bound", "complexity_expr"]
    lines = []
    for key in keys:
        value = getattr(report, key)
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"  {key:<18} {value}")
    return "\n".join(lines)


def cmd_diagnose(args):
    ode, params = _resolve(args)
    T = _horizon(args, params)
    report = diagnose(ode, N=args.N, T=T, m=args.m, eps=args.eps, rk4_steps=args.rk4_steps,
                      with_condition=args.condition)
    data = report.to_dict()
    if params is not None:
        data["preset"] = {"u_in": params.u_in, "reaction": params.reaction, "initial": params.initial, "n": params.n}
    out = _out_dir(args)
    _write_json(out / "diagnostics.json", data, REPORT_SCHEMA)
    print(_table(report))
    for note in report.warnings:
        print(f"  note: {note}")
    print(json.dumps(data, indent=2))
    return 0


def cmd_equivalence(args):
    ode, params = _resolve(args)
    T = _horizon(args, params)
    if ode.k < 2:
        raise InputError("equivalence needs a system of degree k >= 2")
    report = equivalence_check(ode, args.N, T, args.h)
    _write_json(_out_dir(args) / "equivalence.json", report, EQUIVALENCE_SCHEMA)
    print(json.dumps(report, indent=2))
    return 0


def cmd_quadratize(args):
    ode, _ = _resolve(args)
    if ode.k < 2:
        raise InputError("quadratize needs a system of degree k >= 2")
    q = quadratize(ode)
    target = Path(args.out) if args.out else _out_dir(args) / "quadratized.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    save_ode_spec(q.ode, target)
    load_ode_spec(target)  # schema closure check
    report = rhs_consistency_check(ode, q, trials=args.trials, seed=args.seed)
    report.update({"lift_dim": int(q.lift_dim), "segment_offsets": list(q.segment_offsets)})
    _write_json(target.with_name(target.stem + "_consistency.json"), report,
                {"type": "object", "required": ["max_discrepancy", "trials"]})
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="carleman", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        src = p.add_argument_group("ODE source")
        src.add_argument("--preset", help=f"one of {sorted([*models.PRESETS, *SMALL_PRESETS])}")
        src.add_argument("--ode", help="ODE spec JSON file")
        src.add_argument("--n", type=int, help="grid points for reaction-diffusion presets")
        react = src.add_mutually_exclusive_group()
        react.add_argument("--expanded-reaction", dest="reaction", action="store_const", const="expanded",
                           help="linear reaction coefficient -a (preset default)")
        react.add_argument("--literal-reaction", dest="reaction", action="store_const", const="literal",
                           help="linear reaction coefficient +a (non-dissipative)")
        init = src.add_mutually_exclusive_group()
        init.add_argument("--inclusive-initial", dest="initial", action="store_const", const="inclusive",
                          help="u_in on 0 <= y < y* (preset default)")
        init.add_argument("--strict-initial", dest="initial", action="store_const", const="strict",
                          help="u_in on 0 < y < y*")
        p.add_argument("--T", type=float, help="time horizon (preset value or 1)")
        p.add_argument("--out-dir", default="carleman-out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--rk4-steps", type=int, default=DEFAULT_RK4_STEPS, help="steps of the direct RK4 oracle")

    def run_opts(p, scheme_default):
        p.add_argument("--m", type=int, help="time steps (default: h*||A_N|| <= 0.1 for euler, 1000 for rk4)")
        p.add_argument("--p", type=int, help="padding steps (default: m)")
        path = p.add_mutually_exclusive_group()
        path.add_argument("--direct-cl", dest="quadratized_cl", action="store_false", default=False)
        path.add_argument("--quadratized-cl", dest="quadratized_cl", action="store_true")
        p.add_argument("--scheme", choices=["euler", "rk4"], default=scheme_default,
                       help="euler: block linear system solve; rk4: truncation-error study")
        p.add_argument("--export-matrix", action="store_true", help="write A_N in MatrixMarket format")

    p = sub.add_parser("simulate", help="solve one truncated Carleman system")
    common(p)
    run_opts(p, "euler")
    p.add_argument("--N", type=int, default=3)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="sweep the truncation level")
    common(p)
    run_opts(p, "rk4")
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--N-range", dest="N_range", help="a:b inclusive")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("diagnose", help="report R2/R_k/R_k^0, q, sparsity, bounds")
    common(p)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--m", type=int)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--condition", action="store_true", help="estimate cond(L) (small systems only)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("equivalence", help="CL of the quadratized system vs direct CL at N(k-1)")
    common(p)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--h", type=float, default=1e-3)
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser("quadratize", help="write the quadratic form of a degree-k system")
    common(p)
    p.add_argument("--out", help="output spec path")
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_quadratize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    np.random.seed(args.seed)
    try:
        if getattr(args, "N", 1) is not None and getattr(args, "N", 1) < 1:
            raise InputError("--N must be >= 1")
        return args.func(args)
    except (InputError, SpecError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (CarlemanError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
