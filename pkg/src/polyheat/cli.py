"""Command-line front end.

Data (CSV) goes to ``--out`` or stdout; human-readable messages go to
stderr.  Exit codes: 0 success, 1 a check or comparison failed, 2 invalid
parameters or configuration, 3 state explosion or incommensurate grid data.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import statistics
import sys
import time
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import kernel as kn
from .config import ConfigError, ProblemSpec, load_problem
from .cylinder import (AtomicMeasure, TimePartition, fresnel_cylinder_closed,
                       fresnel_cylinder_quadrature, total_variation_estimate)
from .defaults import DEFAULTS
from .dyson import StateExplosionError, dyson_solve, feynman_kac_eval, state_eval
from .quad import QuadSpec
from .spectral import (AliasingError, IncommensurateError, sample_potential, sample_state,
                       strang_refined, strang_solve)

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_EXPLOSION = 0, 1, 2, 3

SEMIGROUP_RTOL = 1e-4
CYLINDER_RTOL = 1e-4
ASYMPTOTIC_BAND = 0.05
VARIATION_TOL = 1e-4


def fmt(v: float) -> str:
    """Shortest round-trip text of a float."""
    return repr(float(v))


@contextlib.contextmanager
def _sink(out: Optional[str]):
    if out is None or out == "-":
        yield sys.stdout
    else:
        with open(out, "w", newline="") as fh:
            yield fh


def _write(out: Optional[str], header: Sequence[str], rows: Iterable[Sequence[str]]):
    with _sink(out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _say(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- kernel
def cmd_kernel(args) -> int:
    params = kn.validate_params(args.p, complex(args.alpha_re, args.alpha_im))
    if not args.t > 0:
        raise ValueError("t must be positive")
    if args.points < 1:
        raise ValueError("points must be >= 1")
    xs = np.linspace(args.xmin, args.xmax, args.points) if args.points > 1 else np.array([args.xmin])
    spec = QuadSpec(abs_tol=args.tol, rel_tol=args.tol)
    table = kn.kernel_table(params, args.t, xs, spec, use_asymptotic=args.asymptotic)
    rows = []
    for kv in table:
        err = kv.err_estimate if kv.converged else math.inf
        rows.append([fmt(kv.x), fmt(kv.value.real), fmt(kv.value.imag), fmt(abs(kv.value)),
                     kv.method.value, fmt(err)])
        if kv.flags and kv.flags[0].startswith("error"):
            _say(f"x = {kv.x:g}: {kv.flags[0]}")
    _write(args.out, ["x", "re", "im", "abs", "method", "err"], rows)
    return EXIT_OK


# ---------------------------------------------------------------- checks
def check_semigroup(prob: ProblemSpec):
    half = 0.5 * prob.t
    rows, ok = [], True
    for x in (0.0, 1.0, 2.0):
        conv, direct, _ = kn.kernel_semigroup_defect(prob.params, half, half, x)
        rel = abs(conv - direct) / abs(direct)
        ok &= rel < SEMIGROUP_RTOL
        rows.append([fmt(x), fmt(conv.real), fmt(conv.imag), fmt(direct.real),
                     fmt(direct.imag), fmt(rel)])
    header = ["x", "re_conv", "im_conv", "re_direct", "im_direct", "rel_err"]
    return header, rows, ok


def _cylinder_cases(t: float):
    return [
        ("n1", AtomicMeasure.from_atoms([((1.0,), 1.0)]), TimePartition(t, (0.25 * t,))),
        ("n2", AtomicMeasure.from_atoms([((1.0, -1.0), 0.5 + 0.5j)]),
         TimePartition(t, (0.3 * t, 0.7 * t))),
    ]


def check_cylinder(prob: ProblemSpec):
    rows, ok = [], True
    for case_id, nu, part in _cylinder_cases(prob.t):
        closed = fresnel_cylinder_closed(nu, part, prob.params)
        quad = fresnel_cylinder_quadrature(nu, part, prob.params)
        diff = abs(quad - closed)
        ok &= diff <= CYLINDER_RTOL * max(1.0, abs(closed))
        rows.append([case_id, fmt(closed.real), fmt(closed.imag), fmt(quad.real),
                     fmt(quad.imag), fmt(diff)])
    header = ["case_id", "re_closed", "im_closed", "re_quad", "im_quad", "abs_diff"]
    return header, rows, ok


def check_asymptotic(prob: ProblemSpec):
    params, t = prob.params, prob.t
    x_star = kn.asymptotic_threshold(params, t)
    # odd p: the side carrying real stationary points
    sign = -1.0 if params.p % 2 and params.c > 0 else 1.0
    rows, ok = [], True
    for xa in np.linspace(x_star, 4.0 * x_star, 16):
        x = sign * xa
        quad = kn.kernel(params, t, x).value
        asym = kn.kernel_asymptotic(params, t, x, threshold=x_star).value
        scaled = abs(quad - asym) / kn.asymptotic_envelope(params, t, x)
        ok &= scaled <= ASYMPTOTIC_BAND
        ratio = abs(quad) / abs(asym) if asym != 0 else math.nan
        rows.append([fmt(x), fmt(quad.real), fmt(quad.imag), fmt(asym.real), fmt(asym.imag),
                     fmt(ratio), fmt(scaled)])
    header = ["x", "re_quad", "im_quad", "re_asym", "im_asym", "ratio", "scaled_diff"]
    return header, rows, ok


def check_variation(prob: ProblemSpec):
    params, t = prob.params, prob.t
    scale = (abs(params.alpha) * t) ** (1.0 / params.p)
    levels = [(0.5 * t,), (0.25 * t, 0.5 * t), (0.125 * t, 0.25 * t, 0.5 * t)]
    probability = params.p == 2 and params.alpha.imag == 0
    rows, ok, prev = [], True, 0.0
    for i, nodes in enumerate(levels):
        est = total_variation_estimate(TimePartition(t, nodes), 0.25 * scale, 8.0 * scale,
                                       0.0, params)
        if probability:
            ok &= abs(est - 1.0) <= VARIATION_TOL
        else:
            ok &= est >= prev - 1e-9
        prev = est
        rows.append([str(i + 1), ";".join(fmt(s) for s in nodes), fmt(est)])
    return ["level", "nodes", "estimate"], rows, ok


CHECKS: dict[str, Callable] = {
    "semigroup": check_semigroup,
    "cylinder": check_cylinder,
    "asymptotic": check_asymptotic,
    "variation": check_variation,
}


def cmd_check(args) -> int:
    prob = load_problem(args.config)
    header, rows, ok = CHECKS[args.check](prob)
    _write(args.out, header, rows)
    _say(f"{args.check}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- solve
def spectral_refined(prob: ProblemSpec, tol: float):
    g = sample_state(prob.u0, prob.N, prob.L)
    Vg = sample_potential(prob.V, prob.N, prob.L)
    return strang_refined(g, Vg, prob.t, prob.params, tol,
                          DEFAULTS["strang_start_steps"], DEFAULTS["strang_max_steps"])


def cmd_solve(args) -> int:
    prob = load_problem(args.config)
    x = prob.L * np.arange(prob.N) / prob.N
    if args.method == "dyson":
        res = dyson_solve(prob.u0, prob.V, prob.t, prob.dyson, prob.params)
        _say(f"truncation bound {res.truncation_bound:.3g}")
        _write(args.out, ["y", "re", "im"],
               [[fmt(y), fmt(a.real), fmt(a.imag)] for y, a in res.state.atoms])
        return EXIT_OK
    if args.method == "feynman-kac":
        vals, bound = feynman_kac_eval(prob.u0, prob.V, prob.t, x, prob.dyson, prob.params)
        _say(f"truncation bound {bound:.3g}")
        _write(args.out, ["x", "re", "im"],
               [[fmt(a), fmt(v.real), fmt(v.imag)] for a, v in zip(x, vals)])
        return EXIT_OK
    if args.method == "spectral":
        sol, steps = spectral_refined(prob, prob.tol)
        _say(f"strang steps {steps}")
        _write(args.out, ["x", "re", "im"],
               [[fmt(a), fmt(v.real), fmt(v.imag)] for a, v in zip(x, sol.values)])
        return EXIT_OK
    # compare
    spec_sol, steps = spectral_refined(prob, prob.tol)
    res = dyson_solve(prob.u0, prob.V, prob.t, prob.dyson, prob.params)
    dys = state_eval(res.state, x)
    fk, _ = feynman_kac_eval(prob.u0, prob.V, prob.t, x, prob.dyson, prob.params)
    diff = np.abs(dys - spec_sol.values)
    _write(args.out, ["x", "re_dyson", "im_dyson", "re_spec", "im_spec", "abs_diff"],
           [[fmt(a), fmt(d.real), fmt(d.imag), fmt(s.real), fmt(s.imag), fmt(e)]
            for a, d, s, e in zip(x, dys, spec_sol.values, diff)])
    deltas = {
        "dyson-spectral": float(diff.max()),
        "dyson-feynman_kac": float(np.abs(dys - fk).max()),
        "feynman_kac-spectral": float(np.abs(fk - spec_sol.values).max()),
    }
    for name, d in deltas.items():
        _say(f"max |delta| {name}: {d:.3g}")
    _say(f"strang steps {steps}; dyson truncation bound {res.truncation_bound:.3g}")
    ok = all(d <= prob.tol for d in deltas.values())
    _say("compare: PASS" if ok else f"compare: FAIL (tol {prob.tol:g})")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- bench
def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise ValueError("repeat must be >= 1")
    prob = load_problem(args.config)
    case = Path(args.config).stem if args.config else "default"
    x = prob.L * np.arange(prob.N) / prob.N
    g = sample_state(prob.u0, prob.N, prob.L)
    Vg = sample_potential(prob.V, prob.N, prob.L)
    xs = np.linspace(-10.0, 10.0, 1000)
    jobs = [
        ("kernel_table", f"{case}/1000pts",
         lambda: kn.kernel_table(prob.params, prob.t, xs)),
        ("dyson", case, lambda: dyson_solve(prob.u0, prob.V, prob.t, prob.dyson, prob.params)),
        ("feynman-kac", case,
         lambda: feynman_kac_eval(prob.u0, prob.V, prob.t, x, prob.dyson, prob.params)),
        ("spectral", f"{case}/1024steps",
         lambda: strang_solve(g, Vg, prob.t, 1024, prob.params)),
    ]
    rows = []
    for method, name, job in jobs:
        times = []
        for _ in range(args.repeat):
            start = time.perf_counter()
            job()
            times.append(1e3 * (time.perf_counter() - start))
        rows.append([method, name, fmt(statistics.median(times))])
    _write(args.out, ["method", "case", "median_ms"], rows)
    return EXIT_OK


# ---------------------------------------------------------------- entry
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyheat",
                                 description="High-order heat-type kernels, Fresnel "
                                             "integrals and Dyson-series solvers.")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="tabulate the fundamental solution")
    k.add_argument("--p", type=int, default=DEFAULTS["p"])
    k.add_argument("--alpha-re", type=float, default=0.0)
    k.add_argument("--alpha-im", type=float, default=0.0)
    k.add_argument("--t", type=float, default=DEFAULTS["t"])
    k.add_argument("--xmin", type=float, default=-5.0)
    k.add_argument("--xmax", type=float, default=5.0)
    k.add_argument("--points", type=int, default=101)
    k.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    k.add_argument("--asymptotic", action="store_true",
                   help="use stationary-phase forms beyond the calibrated threshold")
    k.add_argument("--out")
    k.set_defaults(func=cmd_kernel)

    c = sub.add_parser("check", help="run a cross-check report")
    c.add_argument("check", choices=sorted(CHECKS))
    c.add_argument("--config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("--config")
    s.add_argument("--method", choices=["dyson", "feynman-kac", "spectral", "compare"],
                   default="compare")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="time the solvers")
    b.add_argument("--config")
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StateExplosionError, IncommensurateError, AliasingError) as exc:
        _say(f"error: {exc}")
        return EXIT_EXPLOSION
    except (ConfigError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
