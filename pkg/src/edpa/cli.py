"""Command-line entry point ``edpa``.

Every subcommand writes its data (CSV or JSON) to ``--out`` or stdout and,
when ``--out`` is given, a run manifest next to it as ``<out>.manifest.json``.
Exit codes: 0 success, 1 failed check or library error, 2 usage error.
"""
import argparse
import csv
import io
import json
import math
import platform
import sys
import time

import numpy as np

from . import __version__
from .errors import DomainError, EdpaError
from .identity_oracles import LEMMA_SIZES, seeded_check
from .martingale_kernel import (
    DEFAULT_BUDGET,
    kernel_K,
    kernel_K_equilibrium,
    kernel_K_homogeneous,
    kernel_K_infinite,
    mart_M,
    phi,
    relaxation_distance,
)
from .process_core import (
    ProcessParams,
    as_configuration,
    equidistant,
    h_A,
    km_determinant,
    single_particle_density,
    transition_density,
)
from .sde_simulator import MODELS, OBSERVABLES, ModelParams, SimConfig, dmr_estimate, run_ensemble
from .special_functions import ModularNome, theta1_product, theta_mu

SUITES = ("theta", "lemmas", "kernels", "all")
FAMILIES = ("finite", "homogeneous", "equilibrium", "infinite")


def fmt(value):
    """17 significant digits, the CSV number format."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def write_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.generic):
        return value.item()
    return value


# ---------------------------------------------------------------------------
# verification suites


def _record(name, N, seed, res):
    return {"lemma": name, "N": N, "seed": seed, "residual": float(res), "condition_flag": False}


def theta_checks(seeds):
    """Series vs product, both quasi-periodicities and the derivative identity."""
    out = []
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 7001])
        q = rng.uniform(0.05, 0.9)
        v = complex(rng.uniform(-1, 1), rng.uniform(-0.3, 0.3))
        nome = ModularNome(q=q)
        th = complex(theta_mu(1, v, nome))
        scale = max(1.0, abs(th))
        out.append(_record("theta_series_vs_product", None, seed, abs(th - complex(theta1_product(v, nome))) / scale))
        out.append(_record("theta_shift_by_one", None, seed, abs(complex(theta_mu(1, v + 1, nome)) + th) / scale))
        shifted = complex(theta_mu(1, v + nome.tau, nome))
        factor = -np.exp(-1j * np.pi * nome.tau - 2j * np.pi * v)
        out.append(_record("theta_shift_by_tau", None, seed, abs(shifted - factor * th) / max(1.0, abs(shifted))))
        lhs = float(np.real(theta_mu(1, 0.0, nome, deriv=1)))
        rhs = math.pi * float(np.real(theta_mu(0, 0.0, nome) * theta_mu(2, 0.0, nome) * theta_mu(3, 0.0, nome)))
        out.append(_record("theta_derivative_product", None, seed, abs(lhs - rhs) / max(1.0, abs(lhs))))
    return out


def lemma_checks(seeds):
    return [
        seeded_check(lemma, N, seed).record(seed)
        for lemma, sizes in LEMMA_SIZES.items()
        for N in sizes
        for seed in range(seeds)
    ]


def kernel_checks(seeds):
    """Cardinal property, two routes to the martingale and to the kernel."""
    out = []
    for N in range(2, 7):
        params = ProcessParams(N, 1.0, 4.0)
        xi = equidistant(N, 1.0)
        vals = np.array([[complex(phi(xi, k, v, params)) for k in range(N)] for v in xi.x])
        out.append(_record("cardinal_property", N, None, np.max(np.abs(vals - np.eye(N)))))
    params = ProcessParams(3, 1.0, 4.0)
    xi = equidistant(3, 1.0)
    for seed in range(min(seeds, 10)):
        rng = np.random.default_rng([seed, 7003])
        t, x = rng.uniform(0.1, 0.8), rng.uniform(0, 2 * math.pi)
        k = int(rng.integers(3))
        a = mart_M(xi, k, t, x, params, method="quadrature")
        b = mart_M(xi, k, t, x, params, method="series")
        out.append(_record("martingale_quadrature_vs_series", 3, seed, abs(a - b)))
        s, t = rng.uniform(0.1, 1.0, size=2)
        x, y = rng.uniform(0, 2 * math.pi, size=2)
        a = kernel_K(params, s, x, t, y, form="martingale_sum")
        b = kernel_K(params, s, x, t, y, form="series")
        out.append(_record("kernel_forms", 3, seed, abs(a - b)))
    for N in (2, 3, 4):
        out.append(_record("equilibrium_diagonal", N, None,
                           abs(kernel_K_equilibrium(0.0, 0.0, N, 1.0) - N / (2 * math.pi))))
    return out


def cmd_verify(args):
    suites = ("theta", "lemmas", "kernels") if args.suite == "all" else (args.suite,)
    runners = {"theta": theta_checks, "lemmas": lemma_checks, "kernels": kernel_checks}
    records = []
    for suite in suites:
        for rec in runners[suite](args.seeds):
            rec["suite"] = suite
            rec["passed"] = bool(rec["residual"] < args.tol)
            records.append(rec)
    failed = [r for r in records if not r["passed"]]
    report = {"suite": args.suite, "tol": args.tol, "seeds": args.seeds, "passed": not failed,
              "checks": records, "failures": failed}
    return json.dumps(report, indent=1) + "\n", 0 if not failed else 1


# ---------------------------------------------------------------------------
# evaluation and export


def _params(args):
    return ProcessParams(args.N, args.r, args.tstar)


def cmd_eval(args):
    params = _params(args)
    flags, method = [], args.what
    if args.what == "kernel":
        value = kernel_K(params, args.s, args.x[0], args.t, args.y[0], form=args.form)
        method = args.form
    elif args.what == "h":
        value = h_A(params, params.t_star - args.t, as_configuration(args.x, params.r))
    elif args.what == "qkm":
        x = args.x if args.x else None
        value, flags = km_determinant(params, args.t, args.y, form=args.km_form, x=x, with_flags=True)
        method = args.km_form
    elif args.what == "tpd":
        value = transition_density(params, args.s, args.x, args.t, args.y)
    else:
        value = float(single_particle_density(params.r, params.t_star, args.s, args.x[0], args.t, args.y[0]))
    inputs = {k: getattr(args, k) for k in ("N", "r", "tstar", "s", "t", "x", "y")}
    record = {"inputs": inputs, "value": _json_value(value), "method": method, "flags": list(flags)}
    return json.dumps(record, indent=1) + "\n", 0


def _budget_tag(budget=DEFAULT_BUDGET):
    return f"n{budget.n_max}-l{budget.l_max}-k{budget.k_max}-gh{budget.gh_nodes}:{budget.gh_max}"


def cmd_kernel(args):
    params = _params(args)
    forms = ("martingale_sum", "series") if args.form == "both" else (args.form,)
    rows = []
    for s in args.s:
        for x in args.x:
            for t in args.t:
                for y in args.y:
                    for form in forms:
                        val = kernel_K(params, s, x, t, y, form=form)
                        rows.append((s, x, t, y, val.real, val.imag, form, _budget_tag()))
    return write_csv(("s", "x", "t", "y", "Re K", "Im K", "form", "budget"), rows), 0


def cmd_density(args):
    L = 2 * math.pi * args.r
    grid = L * np.arange(args.grid) / args.grid
    if args.family == "finite":
        params = _params(args)
        rho = [kernel_K(params, args.t, x, args.t, x).real for x in grid]
    elif args.family == "homogeneous":
        rho = [float(np.real(kernel_K_homogeneous(args.N, args.r, args.t, x, args.t, x))) for x in grid]
    elif args.family == "equilibrium":
        rho = [float(np.real(kernel_K_equilibrium(0.0, 0.0, args.N, args.r)))] * len(grid)
    else:
        rho = [float(np.real(kernel_K_infinite(args.rho, args.t, x, args.t, x, t_star=args.tstar))) for x in grid]
    return write_csv(("x", "rho"), zip(grid, rho)), 0


def cmd_relax(args):
    rows = [(T, relaxation_distance(T, args.N, args.r, reference=args.reference)) for T in args.T]
    return write_csv(("T", "d"), rows), 0


def _sim_config(args):
    return SimConfig(dt=args.dt, guard_frac=args.guard, seed=args.seed, paths=args.paths)


def cmd_simulate(args):
    params = ModelParams(args.N, args.r, args.tstar if args.tstar is not None else math.inf, args.a)
    if args.model == "elliptic" and args.tstar is None:
        raise DomainError("the elliptic model needs --tstar")
    init = args.x0 if args.x0 else equidistant(args.N, args.r)
    stats = run_ensemble(args.model, init, _sim_config(args), params, args.tend, bins=args.bins)
    e = stats.edges
    rows = zip(e[:-1], e[1:], stats.counts.astype(int), stats.density, stats.stderr)
    return write_csv(("bin_left", "bin_right", "count", "density", "stderr"), rows), 0


def cmd_dmr(args):
    params = ProcessParams(args.N, args.r, args.tstar)
    est, se = dmr_estimate(args.observable, args.tend, _sim_config(args), params)
    return write_csv(("observable", "T", "paths", "estimate", "stderr"),
                     [(args.observable, args.tend, args.paths, est, se)]), 0


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, tstar_required=True):
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--tstar", type=float, required=tstar_required, default=None)
    p.add_argument("--out", default=None, help="output file (default stdout)")


def _sim_flags(p):
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--tend", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--guard", type=float, default=0.05)


def build_parser():
    parser = argparse.ArgumentParser(prog="edpa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"edpa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run residual suites, JSON report")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="evaluate one quantity, JSON record")
    p.add_argument("--what", choices=("kernel", "h", "qkm", "tpd", "single"), required=True)
    _common(p)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", type=floats, default=[])
    p.add_argument("--y", type=floats, default=[])
    p.add_argument("--form", choices=("martingale_sum", "series"), default="martingale_sum")
    p.add_argument("--km-form", dest="km_form", choices=("determinant", "closed"), default="determinant")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kernel", help="correlation kernel on a grid, CSV")
    _common(p)
    for name in ("s", "x", "t", "y"):
        p.add_argument(f"--{name}", type=floats, required=True, help="comma-separated values")
    p.add_argument("--form", choices=("martingale_sum", "series", "both"), default="both")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("density", help="equal-time density on a grid, CSV")
    p.add_argument("--family", choices=FAMILIES, required=True)
    _common(p, tstar_required=False)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=64)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("relax", help="distance to the equilibrium kernel, CSV")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--T", type=floats, default=[1.0, 5.0, 20.0])
    p.add_argument("--reference", choices=("equilibrium", "standing_wave"), default="equilibrium")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("simulate", help="Monte Carlo position histogram, CSV")
    p.add_argument("--model", choices=MODELS, required=True)
    _common(p, tstar_required=False)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--x0", type=floats, default=None, help="initial positions (default equidistant)")
    _sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dmr", help="martingale-weighted estimate, CSV")
    p.add_argument("--observable", choices=OBSERVABLES, default="one")
    _common(p)
    _sim_flags(p)
    p.set_defaults(func=cmd_dmr)
    return parser


def _versions():
    import scipy

    out = {"edpa": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


def write_manifest(args, outputs, wall):
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "subcommand": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "versions": _versions(),
        "wall_time": wall,
        "outputs": outputs,
    }
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        text, code = args.func(args)
    except EdpaError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        write_manifest(args, [args.out], time.perf_counter() - start)
    else:
        sys.stdout.write(text)
    return code
