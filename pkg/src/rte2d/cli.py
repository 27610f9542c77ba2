"""Command line front end: experiment drivers and CSV emission.

Subcommands:
  solve        one solve on a single mesh; dumps per-direction element means
  convergence  nested-refinement error table for one manufactured case
  compare      stabilized vs plain method on identical meshes
  quad-check   angular quadrature and scattering-matrix diagnostics

Floats are written with repr(), which round-trips exactly through float().
Exit status is 0 only when every requested run converged; solver failures
map to distinct nonzero codes (see ERROR_CODES).
"""

import argparse
import csv
import os
import sys

import numpy as np

from .analysis import (
    case_problem,
    case_quadrature,
    compare_methods,
    convergence_study,
    make_case,
)
from .angular import PhaseFunction, m_bound, scatter_matrix, trapezoid_circle
from .errors import (
    AssumptionError,
    MeshError,
    NonConvergenceError,
    StabilityError,
    SweepCycleError,
)
from .mesh import build_structured_unit_square, load_mesh, refine_regular
from .solver import SolverConfig, solve
from .sweep import build_schedule

ERROR_CODES = (
    (NonConvergenceError, "nonconvergence", 3),
    (StabilityError, "stability", 4),
    (SweepCycleError, "cycle", 5),
    (AssumptionError, "assumption", 6),
    (MeshError, "mesh", 7),
)

_CONFIG_TYPES = {
    "case": int,
    "levels": int,
    "n0": int,
    "n_dirs": int,
    "eta": float,
    "phase": str,
    "method": str,
    "c_bar": float,
    "tol": float,
    "max_iter": int,
    "out": str,
    "mesh": str,
    "deterministic": bool,
    "dump_schedule": int,
    "level": int,
}


def _add_common(p):
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--deterministic", action="store_true", default=False)


def _add_case(p):
    p.add_argument("--case", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--n-dirs", type=int, default=None, help="override case h_theta")
    p.add_argument("--eta", type=float, default=None, help="override case anisotropy")
    p.add_argument("--method", choices=("dodsd", "dodg"), default="dodsd")
    p.add_argument("--c-bar", type=float, default=1.0)
    p.add_argument("--n0", type=int, default=10, help="initial structured grid size")
    p.add_argument("--mesh", default=None, help="initial mesh file instead of --n0")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rte2d", description="2D discrete-ordinates transport experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single solve with a field dump")
    _add_case(p)
    _add_common(p)
    p.add_argument("--level", type=int, default=0, help="refinements of the base mesh")
    p.add_argument(
        "--dump-schedule",
        type=int,
        default=None,
        metavar="L",
        help="also write sweep layers for direction index L",
    )

    p = sub.add_parser("convergence", help="error table over nested refinements")
    _add_case(p)
    _add_common(p)
    p.add_argument("--levels", type=int, default=4)

    p = sub.add_parser("compare", help="stabilized vs plain method")
    _add_case(p)
    _add_common(p)
    p.add_argument("--levels", type=int, default=4)

    p = sub.add_parser("quad-check", help="angular quadrature diagnostics")
    _add_common(p)
    p.add_argument("--n-dirs", type=int, default=20)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--phase", choices=("hg", "linear"), default="hg")
    return parser


def _parse_config_file(path):
    values = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            typ = _CONFIG_TYPES[key]
            try:
                if typ is bool:
                    values[key] = val.lower() in ("1", "true", "yes", "on")
                else:
                    values[key] = typ(val)
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {err}") from err
    return values


def _apply_config_file(args, argv):
    if getattr(args, "config", None) is None:
        return
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, val in _parse_config_file(args.config).items():
        if key not in explicit and hasattr(args, key):
            setattr(args, key, val)


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else str(v) for v in row])


def _table_rows(table):
    for r in table.rows:
        yield (r.level, r.h, r.n_elems, table.n_dirs, r.e1, r.e2, r.e3, r.e4, r.eh, r.iterations)


TABLE_HEADER = ("level", "h", "n_elems", "n_dirs", "e1", "e2", "e3", "e4", "eh", "iters")
RATES_HEADER = ("from_level", "to_level", "e1", "e2", "e3", "e4", "eh")


def _rates_rows(table):
    n = len(table.rows)
    for i in range(n - 1):
        yield (
            table.rows[i].level,
            table.rows[i + 1].level,
            *(table.rates[name][i] for name in ("e1", "e2", "e3", "e4", "eh")),
        )


def write_table(table, out_dir, suffix=""):
    _write_csv(os.path.join(out_dir, f"table{suffix}.csv"), TABLE_HEADER, _table_rows(table))
    _write_csv(os.path.join(out_dir, f"rates{suffix}.csv"), RATES_HEADER, _rates_rows(table))


def read_table_csv(path):
    """Parse a table.csv back into plain (header, value rows) form."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        rows = []
        for row in reader:
            rows.append(
                tuple(
                    int(v) if name in ("level", "n_elems", "n_dirs", "iters") else float(v)
                    for name, v in zip(header, row)
                )
            )
    return header, rows


def _base_mesh(args):
    if args.mesh is not None:
        return load_mesh(args.mesh)
    return build_structured_unit_square(args.n0)


def _cmd_solve(args):
    case = make_case(args.case, eta=args.eta)
    quad = case_quadrature(case, args.n_dirs)
    problem = case_problem(case, quad)
    mesh = _base_mesh(args)
    for _ in range(args.level):
        mesh = refine_regular(mesh)
    config = SolverConfig(
        method=args.method,
        c_bar=args.c_bar,
        tol=args.tol,
        max_iter=args.max_iter,
        deterministic=args.deterministic,
    )
    sol, report = solve(problem, mesh, config)

    if args.dump_schedule is not None:
        l = args.dump_schedule
        if not 0 <= l < quad.n_directions:
            raise ValueError(f"--dump-schedule index {l} outside 0..{quad.n_directions - 1}")
        sched = build_schedule(mesh, quad.directions[l])
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "schedule.txt"), "w", encoding="ascii") as fh:
            for layer in sched.layers:
                fh.write(" ".join(str(int(k)) for k in layer) + "\n")

    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    means = sol.coeffs.mean(axis=2)  # P1 mean over a triangle = coefficient mean
    rows = (
        (l, k, centroids[k, 0], centroids[k, 1], means[l, k])
        for l in range(quad.n_directions)
        for k in range(mesh.n_triangles)
    )
    _write_csv(
        os.path.join(args.out, "field.csv"),
        ("l", "K", "centroid_x", "centroid_y", "u_mean"),
        rows,
    )
    print(
        f"solved case {case.id}: {mesh.n_triangles} elements, "
        f"{quad.n_directions} directions, {report.iterations} iterations, "
        f"delta={report.delta_used!r}"
    )
    return 0


def _cmd_convergence(args):
    case = make_case(args.case, eta=args.eta)
    config = SolverConfig(
        method=args.method,
        c_bar=args.c_bar,
        tol=args.tol,
        max_iter=args.max_iter,
        deterministic=args.deterministic,
    )
    mesh0 = load_mesh(args.mesh) if args.mesh is not None else None
    table = convergence_study(
        case, args.levels, config, n0=args.n0, n_dirs=args.n_dirs, mesh0=mesh0
    )
    write_table(table, args.out)
    last = table.rows[-1]
    print(
        f"case {case.id} {config.method}: {len(table.rows)} levels, "
        f"final eh={last.eh:.4e}"
        + (
            f", finest-pair rate(eh)={table.rates['eh'][-1]:.3f}"
            if table.rates["eh"]
            else ""
        )
    )
    return 0


def _cmd_compare(args):
    case = make_case(args.case, eta=args.eta)
    mesh0 = load_mesh(args.mesh) if args.mesh is not None else None
    cmp = compare_methods(
        case,
        args.levels,
        c_bar=args.c_bar,
        tol=args.tol,
        max_iter=args.max_iter,
        n0=args.n0,
        n_dirs=args.n_dirs,
        mesh0=mesh0,
    )
    write_table(cmp.dodsd, args.out, suffix="_dodsd")
    write_table(cmp.dodg, args.out, suffix="_dodg")
    _write_csv(
        os.path.join(args.out, "delta_effect.csv"),
        ("level", "h", "eh_dodsd", "eh_dodg", "ratio"),
        (
            (a.level, a.h, a.eh, b.eh, r)
            for a, b, r in zip(cmp.dodsd.rows, cmp.dodg.rows, cmp.eh_ratio)
        ),
    )
    worst = max(cmp.eh_ratio)
    print(f"case {case.id}: eh ratio (stabilized/plain) per level {cmp.eh_ratio}, max {worst:.3f}")
    return 0


def _cmd_quad_check(args):
    quad = trapezoid_circle(args.n_dirs)
    if args.phase == "hg":
        phase = PhaseFunction.henyey_greenstein(args.eta)
    else:
        phase = PhaseFunction.linear_anisotropic()
    G = scatter_matrix(phase, quad)
    row_sums = G.sum(axis=1)
    m = m_bound(G)
    weight_sum = float(quad.weights.sum())
    max_dev = float(np.abs(row_sums - 1.0).max())
    print(
        f"phase={args.phase} eta={args.eta!r} n_dirs={args.n_dirs} "
        f"weight_sum={weight_sum!r} m={m!r} max_row_dev={max_dev!r}"
    )
    _write_csv(
        os.path.join(args.out, "quad_check.csv"),
        ("phase", "eta", "n_dirs", "weight_sum", "m", "max_row_dev"),
        [(args.phase, args.eta, args.n_dirs, weight_sum, m, max_dev)],
    )
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "convergence": _cmd_convergence,
    "compare": _cmd_compare,
    "quad-check": _cmd_quad_check,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
        return _COMMANDS[args.command](args)
    except tuple(exc for exc, _, _ in ERROR_CODES) as err:
        for exc, name, code in ERROR_CODES:
            if isinstance(err, exc):
                print(f"error[{name}]: {err}", file=sys.stderr)
                return code
    except ValueError as err:
        print(f"error[config]: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
