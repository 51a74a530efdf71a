"""Command-line front end: solve, simulate, verify, sweep, export data.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 numerical failure.  Output is CSV (header row, '.' decimal, no locale)
or JSON ({config, results, residuals, version}); identical configurations
produce byte-identical files, and both encodings carry the same numeric
values at 17 significant digits.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from .errors import NumericalError
from .optimizer import solve_equalization, solve_recursion
from .rfm import (
    simulate,
    steady_state_shooting,
    steady_state_spectral,
)
from .spectral import RateVector, build_matrix, perron
from .verifier import full_report, turnpike_width

VERSION = "0.1.0"

_SOLVERS = {"recursion": solve_recursion, "equalize": solve_equalization}


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return format(float(value), ".17g")


def _write_csv(stream, header, rows):
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(cell) for cell in row) + "\n")


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return [float(x) for x in value]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def _emit(args, config, results, residuals, csv_header, csv_rows):
    if args.format == "json":
        payload = {
            "config": _jsonify(config),
            "results": _jsonify(results),
            "residuals": _jsonify(residuals),
            "version": VERSION,
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buffer = io.StringIO()
        _write_csv(buffer, csv_header, csv_rows)
        text = buffer.getvalue()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)


def read_rates_file(path):
    """One positive decimal per line; '#' starts a comment."""
    values = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ValueError(f"{path}:{line_no}: not a number: {text!r}")
    if len(values) < 2:
        raise ValueError(f"{path}: need at least two rates")
    return RateVector(np.array(values))


def _resolve_rates(args, parser):
    """RateVector from --rates FILE, or from --n (all ones / the optimum)."""
    if args.rates is not None and args.n is not None:
        parser.error("give exactly one of --rates and --n")
    if args.rates is not None:
        return read_rates_file(args.rates), None
    if args.n is None:
        parser.error("give exactly one of --rates and --n")
    if args.n < 1:
        parser.error(f"--n must be >= 1, got {args.n}")
    if getattr(args, "optimal", False):
        sol = _SOLVERS[getattr(args, "method", "recursion")](args.n)
        return sol.rates, sol
    return RateVector.ones(args.n), None


def _pad(vector, length):
    out = [None] * length
    for i, value in enumerate(vector):
        out[i] = value
    return out


def cmd_perron(args, parser):
    rates, _ = _resolve_rates(args, parser)
    pair = perron(build_matrix(rates), tol=args.tol)
    rows = [
        (i + 1, pair.v[i], pair.sigma, pair.residual)
        for i in range(pair.v.size)
    ]
    config = {"command": "perron", "n": rates.n, "tol": args.tol}
    results = {"sigma": pair.sigma, "v": pair.v, "n": rates.n}
    residuals = {"eigen": pair.residual}
    _emit(args, config, results, residuals,
          ["i", "v", "sigma", "eigen_residual"], rows)
    return 0


def cmd_steady_state(args, parser):
    rates, sol = _resolve_rates(args, parser)
    if sol is not None:
        steady = sol.steady
        sigma = sol.sigma
    else:
        pair = perron(build_matrix(rates), tol=args.tol)
        steady = steady_state_spectral(rates, tol=args.tol)
        sigma = pair.sigma
    rows = [
        (i + 1, steady.e[i], steady.R, sigma)
        for i in range(steady.e.size)
    ]
    config = {"command": "steady-state", "n": rates.n, "tol": args.tol,
              "optimal": bool(getattr(args, "optimal", False))}
    results = {"e": steady.e, "R": steady.R, "sigma": sigma}
    residuals = {"flow_balance": steady.flow_residual(rates)}
    _emit(args, config, results, residuals, ["i", "e", "R", "sigma"], rows)
    return 0


def _initial_state(spec, n, parser):
    if spec == "zeros":
        return np.zeros(n)
    if spec == "half":
        return np.full(n, 0.5)
    if spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            parser.error(f"bad --x0 seed in {spec!r}")
        return np.random.default_rng(seed).uniform(0.0, 1.0, n)
    values = []
    try:
        with open(spec, encoding="utf-8") as handle:
            for line in handle:
                text = line.split("#", 1)[0].strip()
                if text:
                    values.append(float(text))
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read --x0 file {spec!r}: {exc}")
    if len(values) != n:
        parser.error(f"--x0 file holds {len(values)} values, expected {n}")
    return np.array(values)


def cmd_simulate(args, parser):
    rates, _ = _resolve_rates(args, parser)
    x0 = _initial_state(args.x0, rates.n, parser)
    trajectory = simulate(rates, x0, args.t_final, args.step)
    header = ["t"] + [f"x{i}" for i in range(1, rates.n + 1)]
    rows = [
        (trajectory.times[k], *trajectory.states[k])
        for k in range(trajectory.times.size)
    ]
    config = {"command": "simulate", "n": rates.n, "t_final": args.t_final,
              "step": args.step, "x0": args.x0}
    results = {"times": trajectory.times, "states": trajectory.states.tolist(),
               "converged": trajectory.converged}
    residuals = {}
    _emit(args, config, results, residuals, header, rows)
    return 0


def cmd_optimize(args, parser):
    if args.n is None or args.n < 1:
        parser.error("--n must be given and >= 1")
    methods = ["recursion", "equalize"] if args.method == "both" \
        else [args.method]
    solutions = {m: _SOLVERS[m](args.n, tol=args.tol) if m == "recursion"
                 else _SOLVERS[m](args.n) for m in methods}
    primary = solutions[methods[0]]
    gap = None
    if len(solutions) == 2:
        gap = np.abs(solutions["recursion"].rates.lam
                     - solutions["equalize"].rates.lam)

    length = primary.profile.a.size
    lam = _pad(primary.rates.lam, length)
    e = _pad(primary.steady.e, length)
    a = _pad(primary.profile.a, length)
    s = _pad(primary.sensitivities.s, length)
    mu = _pad(primary.mu, length)
    gap_col = _pad(gap, length) if gap is not None else None

    header = ["i", "lambda", "e", "a", "sensitivity", "mu",
              "sigma", "R", "r", "q", "kkt_residual", "eigen_residual"]
    if gap_col is not None:
        header.append("cross_solver_gap")
    rows = []
    for i in range(length):
        row = [i, lam[i], e[i], a[i], s[i], mu[i],
               primary.sigma, primary.R, primary.profile.r, primary.profile.q,
               primary.kkt_residual, primary.eigen_residual]
        if gap_col is not None:
            row.append(gap_col[i])
        rows.append(tuple(row))

    config = {"command": "optimize", "n": args.n, "method": args.method,
              "tol": args.tol}
    results = {
        "lambda": primary.rates.lam, "sigma": primary.sigma, "R": primary.R,
        "e": primary.steady.e, "r": primary.profile.r, "q": primary.profile.q,
        "a": primary.profile.a, "sensitivity": primary.sensitivities.s,
        "mu": primary.mu,
    }
    if gap is not None:
        results["cross_solver_gap"] = gap
    residuals = {"kkt": primary.kkt_residual,
                 "eigen": primary.eigen_residual,
                 "flow_balance": primary.steady.flow_residual(primary.rates)}
    if gap is not None:
        residuals["cross_solver_max_gap"] = float(gap.max())
    _emit(args, config, results, residuals, header, rows)
    return 0


def _parse_eps_list(text, parser):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        parser.error(f"bad --eps list: {text!r}")
    if not values or any(eps <= 0 for eps in values):
        parser.error(f"--eps values must be positive: {text!r}")
    return values


def _range_or_error(args, parser):
    if args.n_min is None or args.n_max is None:
        parser.error("--n-min and --n-max are required")
    if args.n_min < 1 or args.n_max < args.n_min:
        parser.error(f"empty or invalid range [{args.n_min}, {args.n_max}]")
    return range(args.n_min, args.n_max + 1)


def cmd_verify(args, parser):
    span = _range_or_error(args, parser)
    if span.start < 2:
        parser.error("verification bounds need n >= 2")
    solver = _SOLVERS[args.method]
    rows = []
    details = []
    all_ok = True
    for n in span:
        sol = solver(n)
        report = full_report(sol)
        all_ok = all_ok and report.all_passed
        rows.append((n, sol.sigma, sol.profile.r, sol.profile.q,
                     report.M, report.all_passed))
        details.append({
            "n": n,
            "all_passed": report.all_passed,
            "M": report.M,
            "checks": [dataclass_check for dataclass_check in (
                {"name": c.name, "lhs": c.lhs, "rhs": c.rhs,
                 "passed": c.passed, "marginal": c.marginal}
                for c in report.checks)],
        })
    config = {"command": "verify", "n_min": args.n_min, "n_max": args.n_max,
              "method": args.method}
    results = {"rows": details, "all_passed": all_ok}
    residuals = {}
    _emit(args, config, results, residuals,
          ["n", "sigma", "r", "q", "M", "all_passed"], rows)
    return 0 if all_ok else 1


def cmd_sweep(args, parser):
    span = _range_or_error(args, parser)
    eps_values = _parse_eps_list(args.eps, parser)
    solver = _SOLVERS[args.method]
    header = ["n", "sigma", "R", "r", "q"]
    header += [f"width_{eps:g}" for eps in eps_values]
    rows = []
    summary = []
    for n in span:
        sol = solver(n)
        widths = [turnpike_width(sol, eps) for eps in eps_values]
        rows.append((n, sol.sigma, sol.R, sol.profile.r, sol.profile.q,
                     *widths))
        summary.append({"n": n, "sigma": sol.sigma, "R": sol.R,
                        "r": sol.profile.r, "q": sol.profile.q,
                        "widths": dict(zip(map(str, eps_values), widths))})
    config = {"command": "sweep", "n_min": args.n_min, "n_max": args.n_max,
              "method": args.method, "eps": eps_values}
    _emit(args, config, {"rows": summary}, {}, header, rows)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rfmopt",
        description="Budgeted Perron-root minimization and flow-chain "
                    "steady states.",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, rates_args=True):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default="-", help="output path ('-' = stdout)")
        p.add_argument("--tol", type=float, default=1e-12)
        if rates_args:
            p.add_argument("--n", type=int, default=None,
                           help="chain length (all-ones rates unless --optimal)")
            p.add_argument("--rates", default=None,
                           help="rates file: one positive decimal per line")

    p = sub.add_parser("perron", help="Perron root and vector of the rates")
    add_common(p)
    p.add_argument("--optimal", action="store_true",
                   help="with --n: use the solved optimal rates")
    p.add_argument("--method", choices=("recursion", "equalize"),
                   default="recursion")
    p.set_defaults(func=cmd_perron)

    p = sub.add_parser("steady-state", help="equilibrium densities and R")
    add_common(p)
    p.add_argument("--optimal", action="store_true",
                   help="with --n: use the solved optimal rates")
    p.add_argument("--method", choices=("recursion", "equalize"),
                   default="recursion")
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("simulate", help="integrate the chain dynamics")
    add_common(p)
    p.add_argument("--optimal", action="store_true")
    p.add_argument("--method", choices=("recursion", "equalize"),
                   default="recursion")
    p.add_argument("--t-final", type=float, default=100.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--x0", default="half",
                   help="zeros | half | random:SEED | FILE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="solve for the optimal rates")
    add_common(p, rates_args=False)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--method", choices=("recursion", "equalize", "both"),
                   default="recursion")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="run all bound checks over a range")
    add_common(p, rates_args=False)
    p.add_argument("--n-min", type=int, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--method", choices=("recursion", "equalize"),
                   default="recursion")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="per-n summary over a range")
    add_common(p, rates_args=False)
    p.add_argument("--n-min", type=int, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--eps", default="0.05,0.1",
                   help="comma-separated deviation thresholds")
    p.add_argument("--method", choices=("recursion", "equalize"),
                   default="recursion")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        # parser.error inside a command
        return exc.code if exc.code is not None else 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
