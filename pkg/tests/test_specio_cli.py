"""JSON system format, parameter expressions, CLI behavior, and reports."""

import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from pdecert.bench import benchmark_document, benchmark_names, load_benchmark
from pdecert.cli import main
from pdecert.pde_model import validate_system
from pdecert.polymat import S
from pdecert.runner import RunConfig, run_certify
from pdecert.specio import (
    SpecFormatError,
    eval_expression,
    parse_spec,
    parse_spec_dict,
    serialize_spec,
)


def test_expression_evaluator():
    assert eval_expression("0.98*pi^2") == pytest.approx(0.98 * math.pi**2)
    assert eval_expression("1/R", {"R": 20.0}) == pytest.approx(0.05)
    assert eval_expression("-(2+3)*2") == -10.0
    assert eval_expression("2**3") == 8.0
    assert eval_expression(7) == 7.0
    with pytest.raises(SpecFormatError, match="unknown parameter"):
        eval_expression("zeta+1")
    with pytest.raises(SpecFormatError):
        eval_expression("2+*3")


def test_benchmark_parse_and_validate():
    spec = load_benchmark("diffusion-dirichlet")
    assert spec.n == spec.m == spec.q == 1
    assert spec.A0.eval({S: 0.3})[0, 0] == pytest.approx(0.98 * math.pi**2)
    validate_system(spec)


def test_param_override():
    spec = load_benchmark("diffusion-dirichlet", ["lambda=2.5"])
    assert spec.A0.eval({S: 0.0})[0, 0] == pytest.approx(2.5)


def test_round_trip_all_benchmarks():
    for name in benchmark_names():
        spec = load_benchmark(name)
        doc = serialize_spec(spec)
        spec2 = parse_spec_dict(doc)
        assert serialize_spec(spec2) == doc
        assert (spec2.n, spec2.m, spec2.q, spec2.L) == (spec.n, spec.m, spec.q, spec.L)
        assert np.allclose(spec2.B, spec.B)


def test_schema_errors_have_paths(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("")
    with pytest.raises(SpecFormatError, match="not valid JSON"):
        parse_spec(bad)

    doc = benchmark_document("diffusion-dirichlet")
    doc["B"] = [[1, 0, 0, 0]] * 3
    with pytest.raises(SpecFormatError, match="/B"):
        parse_spec_dict(doc)

    doc = benchmark_document("diffusion-dirichlet")
    del doc["n"]
    with pytest.raises(SpecFormatError, match="/n"):
        parse_spec_dict(doc)

    doc = benchmark_document("diffusion-dirichlet")
    doc["A0"] = [[["nonsense_param"]]]
    with pytest.raises(SpecFormatError, match="/A0/0/0/0"):
        parse_spec_dict(doc)


def _write_benchmark(tmp_path, name, **edits):
    doc = benchmark_document(name)
    doc.update(edits)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return path


def test_cli_certify_exit_codes(tmp_path):
    runner = CliRunner()
    spec = _write_benchmark(tmp_path, "diffusion-mixed")
    out = tmp_path / "report.json"
    result = runner.invoke(
        main, ["certify", "gain", "--spec", str(spec), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["status"] == "optimal"
    assert report["results"]["certificate"]["gamma"] == pytest.approx(12.03, rel=0.02)
    assert report["results"]["verification"]["passed"]

    # anti-passive feedthrough: infeasible, exit 1
    doc = benchmark_document("collocated-heat")
    doc["D1"] = [[-1.0]]
    doc["A2"] = []
    doc["B1"] = []
    doc["Ca"] = []
    bad = tmp_path / "antipassive.json"
    bad.write_text(json.dumps(doc))
    result = runner.invoke(main, ["certify", "passivity", "--spec", str(bad), "--out", str(tmp_path / "r2.json")])
    assert result.exit_code == 1

    # schema violation: exit 3
    broken = tmp_path / "broken.json"
    broken.write_text("{}")
    result = runner.invoke(main, ["certify", "gain", "--spec", str(broken)])
    assert result.exit_code == 3

    # unstable system: oracle reports failure (exit 2)
    result = runner.invoke(
        main,
        ["oracle", "gain", "--spec", str(spec), "--param", "lambda=40.0",
         "--mesh", "60", "--out", str(tmp_path / "r3.json")],
    )
    assert result.exit_code == 2


def test_cli_oracle_report(tmp_path):
    runner = CliRunner()
    spec = _write_benchmark(tmp_path, "diffusion-mixed")
    out = tmp_path / "oracle.json"
    result = runner.invoke(
        main,
        ["oracle", "gain", "--spec", str(spec), "--mesh", "150", "--out", str(out)],
    )
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report["results"]["gamma_estimate"] == pytest.approx(12.03, rel=0.01)


def test_report_determinism():
    spec = load_benchmark("diffusion-mixed")
    cfg = RunConfig(mode="gain", seed=7)
    rep1 = run_certify(spec, cfg)
    rep2 = run_certify(spec, cfg)
    c1, c2 = rep1.results["certificate"], rep2.results["certificate"]
    assert c1["gamma"] == pytest.approx(c2["gamma"], rel=1e-9)
    assert rep1.results["verification"] == rep2.results["verification"]


def test_exit_code_matches_status():
    spec = load_benchmark("diffusion-dirichlet", ["lambda=1.05*pi^2"])
    rep = run_certify(spec, RunConfig(mode="gain"))
    assert rep.status == "infeasible"
    assert rep.exit_code == 1


def test_cli_bench_suite(tmp_path):
    runner = CliRunner()
    out = tmp_path / "bench"
    result = runner.invoke(main, ["bench", "tableII", "--sizes", "1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    table = (out / "tableII.csv").read_text().splitlines()
    assert table[0] == "chain_size,gamma,status,wall_time_s"
    assert table[1].startswith("1,")
    assert (out / "tableII.report.json").exists()

    result = runner.invoke(main, ["bench", "nonsense", "--out", str(out)])
    assert result.exit_code == 2  # click usage error for bad choice
