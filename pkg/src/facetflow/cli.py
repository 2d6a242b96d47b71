"""Command-line front end.

Exit codes: 0 success, 1 unparsable input, 2 invalid input, 3 numerical defect.
CSV trajectories use the columns t,x,uL,uR.  FACETFLOW_LOG sets the log level.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys

import click
import numpy as np

from . import analyze, demos, evolve, facets, fdsolve, viscosity
from .errors import (DomainError, NumericalDefect, ParseError, StructuralError, UnsupportedBoundary,
                     ValidationError)
from .profile import Profile, check

EXIT_PARSE, EXIT_INVALID, EXIT_NUMERIC = 1, 2, 3


def _setup_logging() -> None:
    level = os.environ.get("FACETFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(str(exc)) from exc


def _read_profile(path: str) -> Profile:
    return check(Profile.from_json(_read_text(path)))


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        if text:
            click.echo(text, nl=not text.endswith("\n"))
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=None, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _times(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"snapshots must be comma-separated numbers: {exc}") from exc


def _fail(code: int, msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            _fail(EXIT_PARSE, str(exc))
        except (ValidationError, DomainError, UnsupportedBoundary, ValueError) as exc:
            _fail(EXIT_INVALID, str(exc))
        except (NumericalDefect, StructuralError) as exc:
            _fail(EXIT_NUMERIC, str(exc))
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


input_opt = click.option("--input", "input_path", default="-", show_default=True,
                         help="Profile JSON file, '-' for stdin.")
output_opt = click.option("--output", "output_path", default="-", show_default=True)


@click.group()
def main() -> None:
    """Exact and numerical solvers for the one-dimensional facet flow."""
    _setup_logging()


def trajectory_csv(tr: evolve.Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "uL", "uR"])
    for t, p in tr.snapshots:
        for q in p.breakpoints:
            w.writerow([repr(t), repr(q.x), repr(q.u_left), repr(q.u_right)])
    return buf.getvalue()


def trajectory_json(tr: evolve.Trajectory) -> str:
    return _dumps({
        "snapshots": [{"t": t, "profile": p.to_dict()} for t, p in tr.snapshots],
        "events": [e.to_dict() for e in tr.events],
        "extinction_time": tr.extinction_time,
        "diagnostics": tr.diagnostics,
    })


@main.command()
@input_opt
@output_opt
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "events"]), default="json",
              show_default=True, help="events = JSON-lines event log.")
@click.option("--t-end", type=float, default=math.inf, show_default=True)
@click.option("--snapshots", default=None, help="Comma-separated snapshot times.")
@_guarded
def simulate(input_path, output_path, fmt, t_end, snapshots):
    """Run the exact event-driven tracker."""
    p = _read_profile(input_path)
    tr = evolve.simulate(p, t_end, _times(snapshots))
    if fmt == "csv":
        _write(output_path, trajectory_csv(tr))
    elif fmt == "events":
        _write(output_path, "".join(_dumps(e.to_dict()) + "\n" for e in tr.events))
    else:
        _write(output_path, trajectory_json(tr))


@main.command()
@input_opt
@output_opt
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--t-end", type=float, required=True)
@click.option("--snapshots", default=None, help="Frame times to keep (default: every step).")
@click.option("--epsilon", type=float, default=1e-2, show_default=True)
@click.option("--dx", type=float, default=1e-2, show_default=True)
@_guarded
def fd(input_path, output_path, fmt, t_end, snapshots, epsilon, dx):
    """Run the explicit regularised finite-difference oracle."""
    p = _read_profile(input_path)
    times = _times(snapshots)
    out = fdsolve.solve_fd(p, fdsolve.FDConfig(epsilon, dx, t_end), frame_times=times or None)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for t, u in out.frames:
            for x, v in zip(out.grid, u):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])
        _write(output_path, buf.getvalue())
    else:
        _write(output_path, _dumps({
            "grid": out.grid, "dt": out.dt, "steps": out.steps,
            "frames": [{"t": t, "u": u} for t, u in out.frames],
            "energy": out.energy, "dissipation": out.dissipation, "t_quiet": out.t_quiet}))


@main.command()
@input_opt
@output_opt
@click.option("--t-end", type=float, required=True, help="Comparison time.")
@click.option("--snapshots", default=None, help="Extra comparison times.")
@click.option("--epsilon", type=float, default=1e-2, show_default=True, help="Coarsest rung.")
@click.option("--dx", type=float, default=2e-2, show_default=True, help="Coarsest rung.")
@click.option("--n", "rungs", type=int, default=3, show_default=True, help="Number of rungs.")
@_guarded
def compare(input_path, output_path, t_end, snapshots, epsilon, dx, rungs):
    """Error table of the FD oracle against the exact tracker over a halving ladder."""
    p = _read_profile(input_path)
    times = sorted(set(_times(snapshots)) | {t_end})
    tr = evolve.simulate(p, t_end, times)
    ladder = [(epsilon / 2 ** k, dx / 2 ** k) for k in range(rungs)]
    rows = fdsolve.refinement_study(tr, p, ladder, times, t_end)
    _write(output_path, _dumps({"times": times, "rows": rows}))


@main.command("extinction-bound")
@input_opt
@output_opt
@_guarded
def extinction_bound(input_path, output_path):
    """Upper estimate of the extinction time."""
    est = analyze.extinction_bound(_read_profile(input_path))
    _write(output_path, _dumps(est.to_dict()))


@main.command()
@input_opt
@output_opt
@_guarded
def steady(input_path, output_path):
    """Classify whether the profile is stationary."""
    _write(output_path, _dumps(analyze.classify_steady(_read_profile(input_path)).to_dict()))


@main.command()
@input_opt
@output_opt
@click.option("--n", "n_grid", type=int, default=201, show_default=True)
@_guarded
def obstacle(input_path, output_path, n_grid):
    """Solve a band-constrained obstacle problem.

    Input JSON: {"interval": [alpha, beta], "chi_l": 1, "chi_r": -1, "Delta": 2,
    "Z": number or [[x, z], ...] samples (linear interpolation)}.
    """
    try:
        d = json.loads(_read_text(input_path))
        a, b = (float(v) for v in d["interval"])
        cl, cr = int(d["chi_l"]), int(d["chi_r"])
        delta = float(d.get("Delta", 2.0))
        z = d.get("Z", 0.0)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed obstacle problem: {exc}") from exc
    if isinstance(z, (int, float)):
        zc = float(z)
        Z = lambda x: np.full_like(x, zc)
    else:
        pts = np.asarray(z, dtype=float)
        Z = lambda x: np.interp(x, pts[:, 0], pts[:, 1])
    prob = viscosity.ObstacleProblem(a, b, Z, cl, cr, delta)
    res = viscosity.solve_obstacle(prob, n_grid)
    out = {"x": res.x, "zeta": res.zeta, "lambda": res.lam, "sweeps": res.sweeps,
           "residual": res.residual}
    if isinstance(z, (int, float)) and delta == 2.0:
        out["lambda_affine"] = viscosity.lambda_affine(1, cl, cr, b - a)
    _write(output_path, _dumps(out))


@main.command()
@input_opt
@output_opt
@_guarded
def inspect(input_path, output_path):
    """Facets, transition numbers and the Omega field of a profile."""
    p = _read_profile(input_path)
    fs = facets.detect_facets(p)
    seeded, made = facets.seed_missing_facets(p)
    om = facets.omega_field(p)
    _write(output_path, _dumps({
        "facets": [f.to_dict() for f in fs],
        "created": [f.to_dict() for f in made],
        "omega": [list(s) for s in om.samples],
        "steady": analyze.classify_steady(p).to_dict(),
    }))


@main.command()
@click.argument("name", type=click.Choice(["tent-up", "tent-down", "oscillating", "random"]))
@output_opt
@click.option("--d", type=float, default=2.0, show_default=True, help="tent-up apex height.")
@click.option("--e", type=float, default=0.0, show_default=True, help="tent-down apex height.")
@click.option("--n", type=int, default=5, show_default=True,
              help="oscillating: truncation index; random: breakpoint count.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["dirichlet", "neumann", "periodic"]),
              default="dirichlet", show_default=True, help="random: boundary condition kind.")
@_guarded
def demo(name, output_path, d, e, n, seed, fmt):
    """Write one of the named example profiles as JSON."""
    if name == "tent-up":
        p = demos.tent_up(d)
    elif name == "tent-down":
        p = demos.tent_down(e)
    elif name == "oscillating":
        p = demos.oscillating(n)
    else:
        p = demos.random_profile(seed, n, fmt)
    _write(output_path, p.to_json())


if __name__ == "__main__":
    main()
