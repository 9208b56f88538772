"""Command-line harness: single solves, convergence tables, sweeps, field export
and the asymptotics validation report.

Exit codes: 0 success, 2 invalid arguments, 3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import asymptotics as asy
from . import norms
from .assembly import FORMS, METHODS, MODES, MethodConfig, solve
from .bubbles import BubbleError
from .sparse import NoConvergence, SingularMatrix

HEADER = ["N", "method", "L2", "eoc_L2", "H1", "eoc_H1", "stab", "eoc_stab",
          "eps_norm", "max_value", "wall_time_s"]
EXIT_ARGS, EXIT_SOLVER, EXIT_IO = 2, 3, 4
SOLVER_ERRORS = (SingularMatrix, NoConvergence, BubbleError, ArithmeticError)


class SolverFailure(click.ClickException):
    exit_code = EXIT_SOLVER


class OutputFailure(click.ClickException):
    exit_code = EXIT_IO


# -- problems --------------------------------------------------------------------
def _reference_exact(eps, n=512):
    """Fine layer-adapted Galerkin solution of the channel problem as a stand-in exact solution."""
    ref = asy.reference_solution(eps, n)
    se = math.sqrt(eps)
    bands = {"x": [(0.0, eps)], "y": [(0.0, se), (1.0, se)]}
    value = norms._with_bands(lambda x, y: ref.evaluate(x, y), bands)
    return norms.ExactSolution(value, ref.gradient, norms.constant_rhs(1.0),
                               "channel reference", bands)


def problem_rhs(problem, eps, f_choice="default"):
    if f_choice == "zero":
        return norms.zero_exact().rhs
    if problem == "manufactured":
        return norms.manufactured_rhs(eps)
    if problem == "channel":
        return norms.constant_rhs(1.0)
    raise ValueError(f"unknown problem {problem!r}")


def problem_setup(problem, eps, f_choice="default"):
    """Right-hand side and exact (or reference) solution of a named problem."""
    if f_choice == "zero":
        ex = norms.zero_exact()
        return ex.rhs, ex
    if problem == "manufactured":
        ex = norms.manufactured(eps)
        return ex.rhs, ex
    if problem == "channel":
        return norms.constant_rhs(1.0), _reference_exact(eps)
    raise ValueError(f"unknown problem {problem!r}")


# -- runs --------------------------------------------------------------------------
def run_point(problem, method, N, eps, form="standard", mode="general", zoom=10, quad=4,
              f_choice="default"):
    """Solve one configuration and return its error report and wall time."""
    f, ex = problem_setup(problem, eps, f_choice)
    cfg = MethodConfig(method=method, mode=mode, form=form, zoom=zoom, quad=quad)
    t0 = time.perf_counter()
    u = solve(N, eps, f, cfg)
    rep = norms.error_norms(u, ex, quad=quad)
    return rep, time.perf_counter() - t0


def _run_point_args(args):
    return run_point(*args)


def run_points(points, jobs=1):
    """Run ``points`` (argument tuples for :func:`run_point`), keeping their order."""
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(min(jobs, len(points))) as ex:
            return list(ex.map(_run_point_args, points))
    return [run_point(*p) for p in points]


def table_rows(method, Ns, results, timing=True):
    """TableRow dicts for one method; the EOC entries of the first row stay blank."""
    rows = []
    for k, (N, (rep, wall)) in enumerate(zip(Ns, results)):
        row = dict(N=N, method=method, L2=rep.L2, H1=rep.H1, stab=rep.stab,
                   eps_norm=rep.eps_norm, max_value=rep.max_value,
                   wall_time_s=wall if timing else 0.0)
        for key in ("L2", "H1", "stab"):
            row["eoc_" + key] = None
            if k:
                prev = rows[-1][key]
                cur = row[key]
                if prev > 0 and cur > 0:
                    row["eoc_" + key] = float(norms.eoc([prev, cur], [Ns[k - 1], N])[0])
        rows.append(row)
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) or isinstance(v, str):
        return str(v)
    return f"{v:.9e}"


def format_table(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in HEADER])
    return buf.getvalue()


def write_text(path, text):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputFailure(f"cannot write {path}: {exc}") from exc


# -- field export ----------------------------------------------------------------------
def sample_field(u, samples=4):
    """Values of u_h on the uniform grid with ``samples`` steps per element."""
    n = u.mesh.N * samples
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return t, u.evaluate(X, Y)


def vtk_text(t, V, name="u_h"):
    n = t.size
    lines = ["# vtk DataFile Version 3.0", f"{name} sampled on a uniform grid", "ASCII",
             "DATASET STRUCTURED_GRID", f"DIMENSIONS {n} {n} 1", f"POINTS {n * n} double"]
    # VTK orders points with x running fastest
    for j in range(n):
        for i in range(n):
            lines.append(f"{t[i]:.9e} {t[j]:.9e} 0")
    lines += [f"POINT_DATA {n * n}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    lines += [f"{V[i, j]:.9e}" for j in range(n) for i in range(n)]
    return "\n".join(lines) + "\n"


def csv_field_text(t, V):
    out = ["x,y,value"]
    n = t.size
    out += [f"{t[i]:.9e},{t[j]:.9e},{V[i, j]:.9e}" for j in range(n) for i in range(n)]
    return "\n".join(out) + "\n"


# -- option parsing ----------------------------------------------------------------
def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        Ns = [int(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers")
    if not Ns or any(n < 1 for n in Ns):
        raise click.BadParameter("N must be positive")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise click.BadParameter("N-list must be strictly increasing")
    return Ns


def _float_list(ctx, param, value):
    try:
        vals = [float(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated numbers")
    if not vals or any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise click.BadParameter("eps must be positive")
    return vals


def _method_list(ctx, param, value):
    ms = [m.strip().lower() for m in str(value).split(",") if m.strip()]
    bad = [m for m in ms if m not in METHODS]
    if not ms or bad:
        raise click.BadParameter(f"methods must be among {', '.join(METHODS)}")
    if len(set(ms)) != len(ms):
        raise click.BadParameter("duplicate method")
    return ms


def common(f):
    opts = [
        click.option("--problem", type=click.Choice(["channel", "manufactured"]),
                     default="manufactured", show_default=True),
        click.option("--N", "Ns", callback=_int_list, default="10,20,40,80,160",
                     show_default=True, help="mesh size or comma-separated list"),
        click.option("--eps", "eps", callback=_float_list, default="1e-6", show_default=True),
        click.option("--form", type=click.Choice(FORMS), default="standard", show_default=True),
        click.option("--mode", type=click.Choice(MODES), default="general", show_default=True),
        click.option("--zoom", type=click.IntRange(4, None), default=10, show_default=True),
        click.option("--quad", type=click.IntRange(2, None), default=4, show_default=True),
        click.option("--jobs", type=click.IntRange(1, None), default=1, show_default=True),
        click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True),
        click.option("--f", "f_choice", type=click.Choice(["default", "zero"]), default="default",
                     show_default=True, help="'zero' replaces the right-hand side by f = 0"),
        click.option("--timing/--no-timing", default=True, show_default=True,
                     help="record wall times (off gives byte-reproducible tables)"),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _check_mode(method, mode):
    if mode == "analysis" and method != "bmz":
        raise click.BadParameter("analysis mode is only defined for bmz", param_hint="--mode")


def _single_eps(eps):
    if len(eps) != 1:
        raise click.BadParameter("this command takes a single eps", param_hint="--eps")
    return eps[0]


def _tables(problem, methods, Ns, eps, form, mode, zoom, quad, jobs, f_choice, timing):
    for m in methods:
        _check_mode(m, mode)
    points = [(problem, m, N, eps, form, mode, zoom, quad, f_choice)
              for m in methods for N in Ns]
    try:
        res = run_points(points, jobs)
    except SOLVER_ERRORS as exc:
        raise SolverFailure(f"solver failure: {exc}") from exc
    rows = []
    for k, m in enumerate(methods):
        rows += table_rows(m, Ns, res[k * len(Ns):(k + 1) * len(Ns)], timing)
    return rows


@click.group()
def main():
    """Bubble-enriched finite elements for convection-diffusion on the unit square."""


@main.command("solve")
@click.option("--method", type=click.Choice(METHODS), default="bmz", show_default=True)
@common
def solve_cmd(method, problem, Ns, eps, form, mode, zoom, quad, jobs, out, f_choice, timing):
    """Solve and report errors and the maximum for each N."""
    rows = _tables(problem, [method], Ns, _single_eps(eps), form, mode, zoom, quad, jobs,
                   f_choice, timing)
    text = format_table(rows)
    write_text(os.path.join(out, "table.csv"), text)
    click.echo(text, nl=False)


@main.command("table")
@click.option("--method", type=click.Choice(METHODS), default="bmz", show_default=True)
@common
def table_cmd(method, problem, Ns, eps, form, mode, zoom, quad, jobs, out, f_choice, timing):
    """Convergence table with EOC columns."""
    if len(Ns) < 2:
        raise click.BadParameter("a table needs at least two mesh sizes", param_hint="--N")
    rows = _tables(problem, [method], Ns, _single_eps(eps), form, mode, zoom, quad, jobs,
                   f_choice, timing)
    text = format_table(rows)
    write_text(os.path.join(out, "table.csv"), text)
    click.echo(text, nl=False)


@main.command("compare-methods")
@click.option("--method", "methods", callback=_method_list, default="bmz,rfbe,rfb",
              show_default=True, help="comma-separated methods (at least two)")
@common
def compare_cmd(methods, problem, Ns, eps, form, mode, zoom, quad, jobs, out, f_choice, timing):
    """One row per (method, N) with identical solver settings."""
    if len(methods) < 2:
        raise click.BadParameter("compare needs at least two methods", param_hint="--method")
    rows = _tables(problem, methods, Ns, _single_eps(eps), form, mode, zoom, quad, jobs,
                   f_choice, timing)
    text = format_table(rows)
    write_text(os.path.join(out, "table.csv"), text)
    click.echo(text, nl=False)


@main.command("sweep")
@click.option("--method", "methods", callback=_method_list, default="bmz", show_default=True)
@common
def sweep_cmd(methods, problem, Ns, eps, form, mode, zoom, quad, jobs, out, f_choice, timing):
    """Tables for every eps in a list, one sub-directory ``eps_<value>`` each."""
    for e in eps:
        rows = _tables(problem, methods, Ns, e, form, mode, zoom, quad, jobs, f_choice, timing)
        path = os.path.join(out, f"eps_{e:g}", "table.csv")
        write_text(path, format_table(rows))
        click.echo(path)


@main.command("field-export")
@click.option("--method", type=click.Choice(METHODS), default="bmz", show_default=True)
@click.option("--samples", type=click.IntRange(1, None), default=4, show_default=True,
              help="samples per element and direction")
@common
def field_cmd(method, samples, problem, Ns, eps, form, mode, zoom, quad, jobs, out, f_choice,
              timing):
    """Write u_h on a uniform sample grid as legacy VTK and CSV."""
    e = _single_eps(eps)
    _check_mode(method, mode)
    f = problem_rhs(problem, e, f_choice)
    cfg = MethodConfig(method=method, mode=mode, form=form, zoom=zoom, quad=quad)
    for N in Ns:
        try:
            u = solve(N, e, f, cfg)
        except SOLVER_ERRORS as exc:
            raise SolverFailure(f"solver failure: {exc}") from exc
        t, V = sample_field(u, samples)
        base = os.path.join(out, f"field_{method}_{N}")
        write_text(base + ".vtk", vtk_text(t, V))
        write_text(base + ".csv", csv_field_text(t, V))
        click.echo(f"{base}.vtk max {V.max():.6f}")


@main.command("validate-asymptotics")
@click.option("--eps", "eps", callback=_float_list, default="1e-2,3e-3,1e-3,3e-4,1e-4",
              show_default=True)
@click.option("--ref-eps", callback=_float_list, default="1e-2,3e-3,1e-3", show_default=True)
@click.option("--n", "n", type=click.IntRange(8, None), default=256, show_default=True,
              help="cells per direction of the layer grids (multiple of 4)")
@click.option("--ref-n", type=click.IntRange(8, None), default=512, show_default=True)
@click.option("--jobs", type=click.IntRange(1, None), default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
def asymptotics_cmd(eps, ref_eps, n, ref_n, jobs, out):
    """Corrector scaling exponents, expansion error and zeroth-order identities."""
    if n % 4 or ref_n % 4:
        raise click.BadParameter("grid sizes must be multiples of 4")
    if len(eps) < 2 or len(ref_eps) < 2:
        raise click.BadParameter("need at least two eps values")
    if min(eps + ref_eps) < asy.MIN_XI_EPS:
        raise click.BadParameter(f"eps below {asy.MIN_XI_EPS:g} is not supported")
    try:
        rows, slopes = asy.corrector_sweep(eps, n, jobs)
        erows, eslope = asy.expansion_sweep(ref_eps, ref_n)
    except SOLVER_ERRORS as exc:
        raise SolverFailure(f"solver failure: {exc}") from exc
    idr = [asy.verify_zeroth_order_identities(N) for N in (4, 16)]
    rows += erows
    rows += [(0.0, f"identity_residual_N{r.N}", r.max(), 0.0) for r in idr]
    path = os.path.join(out, "asymptotics_report.csv")
    try:
        asy.write_report(path, rows)
    except OSError as exc:
        raise OutputFailure(f"cannot write {path}: {exc}") from exc
    for k, s in slopes.items():
        click.echo(f"{k}: fitted exponent {s:.4f}")
    click.echo(f"u_ref - u_as (eps-norm): fitted exponent {eslope:.4f}")
    for r in idr:
        click.echo(f"identities N={r.N}: max residual {r.max():.2e}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
