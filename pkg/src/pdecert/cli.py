"""Command-line interface: certify, oracle cross-checks, and benchmark suites.

Exit codes: 0 certified/feasible, 1 infeasible, 2 numerical failure,
3 input error.  A summary goes to stdout; the full report is written as JSON.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__, runner
from .pde_model import SystemValidationError
from .sdp import DegreeCoverageError
from .specio import SpecFormatError, parse_spec

INPUT_ERRORS = (SpecFormatError, SystemValidationError, DegreeCoverageError, FileNotFoundError, ValueError, KeyError)


def _load(spec_path, params):
    return parse_spec(spec_path, params)


def _finish(report, out):
    if out:
        report.write(out)
    summary = {
        "status": report.status,
        "exit_code": report.exit_code,
        "wall_time": round(report.wall_time, 3),
    }
    if report.kind == "certify":
        cert = report.results["certificate"]
        summary["gamma"] = cert["gamma"]
        if "verification" in report.results:
            summary["verified"] = report.results["verification"]["passed"]
    elif report.kind == "oracle":
        summary.update({k: v for k, v in report.results.items() if k != "error"})
    click.echo(json.dumps(summary, default=str))
    sys.exit(report.exit_code)


def _fail_input(exc):
    click.echo(f"input error: {exc}", err=True)
    sys.exit(3)


@click.group()
@click.version_option(__version__)
def main():
    """Certified gain bounds and passivity certificates for coupled 1-D PDE systems."""


@main.group()
def certify():
    """Solve the certification problem for a system file."""


def _certify_options(fn):
    opts = [
        click.option("--spec", "spec_path", required=True, type=click.Path(), help="system JSON file"),
        click.option("--param", "params", multiple=True, help="NAME=VALUE parameter override"),
        click.option("--d1", default=2, show_default=True, help="multiplier basis degree"),
        click.option("--d2", default=2, show_default=True, help="kernel basis degree"),
        click.option("--dneg", default=None, type=int, help="negativity basis degree (default: audited)"),
        click.option("--eps", default=runner.DEFAULT_EPS, show_default=True, help="coercivity margin"),
        click.option("--tol", default=runner.DEFAULT_TOL, show_default=True, help="solver tolerance"),
        click.option("--maxiter", default=runner.DEFAULT_MAXITER, show_default=True),
        click.option("--no-retry", is_flag=True, help="disable the degree+1 retry on infeasible runs"),
        click.option("--seed", default=0, show_default=True, help="verification sampling seed"),
        click.option("--samples", default=50, show_default=True, help="verification sample count"),
        click.option("--dump-problem", default=None, type=click.Path(), help="write the assembled problem in sparse text form"),
        click.option("--out", default="report.json", show_default=True, type=click.Path(), help="full JSON report path"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _run_certify(mode, spec_path, params, d1, d2, dneg, eps, tol, maxiter, no_retry, seed, samples, dump_problem, out):
    try:
        spec = _load(spec_path, params)
        config = runner.RunConfig(
            mode=mode, d1=d1, d2=d2, dneg=dneg, eps=eps, tol=tol, maxiter=maxiter,
            retry=not no_retry, seed=seed, samples=samples, dump=dump_problem,
        )
        report = runner.run_certify(spec, config)
    except INPUT_ERRORS as exc:
        _fail_input(exc)
    _finish(report, out)


@certify.command("gain")
@_certify_options
def certify_gain(**kw):
    """Smallest certified bound on the input-to-output energy gain."""
    _run_certify("gain", **kw)


@certify.command("passivity")
@_certify_options
def certify_passivity(**kw):
    """Feasibility certificate for input-output passivity (needs m == q)."""
    _run_certify("passivity", **kw)


@main.group()
def oracle():
    """Finite-difference cross-checks (independent of the certification path)."""


def _oracle_options(fn):
    opts = [
        click.option("--spec", "spec_path", required=True, type=click.Path()),
        click.option("--param", "params", multiple=True),
        click.option("--mesh", default=200, show_default=True, help="interior grid points"),
        click.option("--wmin", default=runner.oracle.DEFAULT_WMIN, show_default=True),
        click.option("--wmax", default=runner.oracle.DEFAULT_WMAX, show_default=True),
        click.option("--points", default=runner.oracle.DEFAULT_POINTS, show_default=True),
        click.option("--out", default="report.json", show_default=True, type=click.Path()),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _run_oracle(mode, spec_path, params, mesh, wmin, wmax, points, out):
    try:
        spec = _load(spec_path, params)
        config = runner.RunConfig(mode=mode, mesh=mesh, wmin=wmin, wmax=wmax, points=points)
        report = runner.run_oracle(spec, config)
    except INPUT_ERRORS as exc:
        _fail_input(exc)
    _finish(report, out)


@oracle.command("gain")
@_oracle_options
def oracle_gain(**kw):
    """Frequency-sweep gain estimate of the discretized system."""
    _run_oracle("gain", **kw)


@oracle.command("passivity")
@_oracle_options
def oracle_passivity(**kw):
    """Frequency-sweep positive-realness check of the discretized system."""
    _run_oracle("passivity", **kw)


@main.command()
@click.argument("suite", type=click.Choice(["tableI", "tableII", "exampleA-sweep"]))
@click.option("--out", default="bench_out", show_default=True, type=click.Path())
@click.option("--tol", default=runner.DEFAULT_TOL, show_default=True)
@click.option("--sizes", default="1,2,3", show_default=True, help="chain sizes for tableII")
@click.option("--mesh", default=600, show_default=True, help="oracle mesh for tableI")
def bench(suite, out, tol, sizes, mesh):
    """Run a bundled benchmark suite and write comparison tables."""
    try:
        size_list = tuple(int(s) for s in sizes.split(",") if s.strip())
        report = runner.run_bench(suite, out, tol=tol, sizes=size_list, mesh=mesh)
    except INPUT_ERRORS as exc:
        _fail_input(exc)
    click.echo(json.dumps({"status": report.status, "out": str(out), "wall_time": round(report.wall_time, 1)}))
    sys.exit(report.exit_code)


if __name__ == "__main__":
    main()
