import csv
import io
import json
import math

import numpy as np
import pytest

from holonomy_lab import __version__
from holonomy_lab.cli import main
from holonomy_lab.errors import ConfigError
from holonomy_lab.loop_space import AlgebraLoop
from holonomy_lab.report_cli import (SCHEMA_VERSION, RunReport, default_config_path, emit_plots, load_config,
                                     parse_config, parse_filter, parse_value, run_suite, summary_lines,
                                     worker_count)

TINY = """
[run]
name = tiny
seed = 7

[case transport.exp_match]
module = transport
operation = exp_match
tolerance = 1e-10
groups = ["su2", "so3"]
count = 3
N = 64

[case loops.basis_gram]
module = loop_space
operation = basis_gram
tolerance = 1e-12
groups = ["su2"]
K = 2
N = 64

[case spectrum.shape_operator_match]
module = fiber_spectra
operation = shape_operator
metric = match
tolerance = 1e-4
seed = 11
groups = ["su2"]
count = 1
K = 1
N = 32

[case traces.trace_square]
module = fiber_spectra
operation = trace_square
tolerance = 1e-12
groups = ["su2", "su3"]
count = 2
K = 16
"""

FAILING = TINY + """
[case traces.impossible]
module = fiber_spectra
operation = trace_square
tolerance = 1.0
compare = min
groups = ["su2"]
count = 1
K = 4
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(TINY)
    return p


def test_parse_value():
    assert parse_value("pi / 4") == pytest.approx(math.pi / 4)
    assert parse_value("[1, 2 * 3, -inf]") == [1, 6, -math.inf]
    assert parse_value("2 ** 10") == 1024
    assert parse_value("rkmk4") == "rkmk4"
    assert parse_value("True") is True
    assert parse_value("'quoted'") == "quoted"
    with pytest.raises(ValueError):
        parse_value("__import__('os')")
    with pytest.raises(SyntaxError):
        parse_value("1 +")


@pytest.mark.parametrize("text,line,fragment", [
    ("[run]\nseed = 1\n[case a]\nmodule = transport\noperation = nope\ntolerance = 1\n", 5, "nope"),
    ("[run]\nseed = 1\n[case a]\nmodule = transport\noperation = exp_match\n", 3, "missing 'tolerance'"),
    ("[run]\nseed = 1\n\n[case a]\nmodule = transport\noperation = exp_match\ntolerance = 'x'\n", 7,
     "tolerance must be a number"),
    ("[run]\nseed = 1.5\n", 2, "seed must be an integer"),
    ("[run]\nseed = 1\n[other]\nx = 1\n", 3, "unknown section"),
    ("seed = 1\n", 1, "outside any section"),
    ("[run]\nseed = 1\n[case a]\nmodule = transport\noperation = exp_match\ntolerance = 1\ncompare = mid\n", 7,
     "compare"),
    ("[run]\nseed = 1\n[case a]\nmodule = transport\noperation = exp_match\ntolerance = 1\ncount = [1,\n", 7,
     "bad value"),
])
def test_config_errors_carry_file_and_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "suite.ini")
    assert str(exc.value).startswith(f"suite.ini:{line}:")
    assert fragment in str(exc.value)


def test_missing_seed_is_derived_deterministically():
    text = "[run]\nseed = 5\n[case a]\nmodule = transport\noperation = exp_match\ntolerance = 1\n"
    a, b = parse_config(text).cases[0].seed, parse_config(text).cases[0].seed
    assert a == b and 0 <= a < 2 ** 64
    assert a != parse_config(text.replace("seed = 5", "seed = 6")).cases[0].seed


def test_default_config_loads():
    cfg = load_config(default_config_path())
    ids = [c.id for c in cfg.cases]
    assert len(ids) == len(set(ids)) == 22
    assert cfg.seed == 20240917
    with pytest.raises(ConfigError):
        load_config("/nonexistent/suite.ini")


def test_filter_semantics(tiny):
    cfg = load_config(tiny)
    assert parse_filter(" a, b  c ") == ["a", "b", "c"]
    assert parse_filter(None) == []
    rep = run_suite(cfg, "gram, exp_match")
    assert [c["id"] for c in rep.cases] == ["loops.basis_gram", "transport.exp_match"]
    with pytest.raises(ConfigError):
        run_suite(cfg, "gram, nothing_matches_this")


def test_run_suite_report_structure(tiny, tmp_path):
    rep = run_suite(load_config(tiny), out_dir=tmp_path / "out", threads=2)
    assert rep.exit_code == 0 and not rep.failed
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["environment"]["version"] == __version__
    assert data["environment"]["group_ids"] == ["so3", "su2", "su3"]
    assert data["timing"]["workers"] == 2 and data["timing"]["total"] >= 0
    for c in data["cases"]:
        assert {"id", "module", "operation", "seed", "tolerance", "measured", "status", "artifacts"} <= set(c)
    spec = [c for c in data["cases"] if c["id"] == "spectrum.shape_operator_match"][0]
    assert spec["artifacts"] == ["spectrum.csv", "spectrum.gp"]
    assert (tmp_path / "out" / "spectrum.csv").exists()
    assert summary_lines(rep)[-1] == "4 cases, 0 failed"


def test_reports_are_deterministic_across_worker_counts(tiny):
    cfg = load_config(tiny)
    a = run_suite(cfg, threads=1)
    b = run_suite(cfg, threads=3)
    assert a.deterministic_json() == b.deterministic_json()
    assert RunReport.from_dict(json.loads(a.to_json())).deterministic_json() == a.deterministic_json()


def test_emit_plots_on_empty_report_writes_nothing(tmp_path):
    out = tmp_path / "plots"
    assert emit_plots(RunReport([], {}), out) == []
    assert not out.exists()


def test_non_finite_values_serialize(tmp_path):
    rep = RunReport([{"id": "x", "status": "fail", "measured": math.inf, "compare": "max", "tolerance": 1.0}], {})
    assert json.loads(rep.to_json())["cases"][0]["measured"] == "inf"


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("HOLONOMY_LAB_THREADS", "2")
    assert worker_count(8) == 2 and worker_count(1) == 1
    monkeypatch.setenv("HOLONOMY_LAB_THREADS", "many")
    with pytest.raises(ConfigError):
        worker_count(4)


def test_verify_exit_codes(tiny, tmp_path, capsys):
    assert main(["verify", "--config", str(tiny), "--filter", "gram", "--no-plots"]) == 0
    assert "PASS  loops.basis_gram" in capsys.readouterr().out
    bad = tmp_path / "bad.ini"
    bad.write_text(FAILING)
    assert main(["verify", "--config", str(bad), "--filter", "impossible"]) == 1
    assert main(["verify", "--config", str(tmp_path / "missing.ini")]) == 2
    assert "error" in capsys.readouterr().err
    bad.write_text("[run]\nseed = x y\n")
    assert main(["verify", "--config", str(bad)]) == 2


def test_plots_subcommand(tiny, tmp_path, capsys):
    run_suite(load_config(tiny), "spectrum", out_dir=tmp_path / "r", plots=False)
    assert not (tmp_path / "r" / "spectrum.csv").exists()
    assert main(["plots", "--report", str(tmp_path / "r" / "report.json"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "spectrum.gp").exists()
    assert "spectrum.csv" in capsys.readouterr().out


def test_transport_subcommand(tmp_path, rng):
    u = AlgebraLoop.constant(np.diag([0.5j, -0.5j]), 64, "su2")
    src = tmp_path / "loop.json"
    src.write_text(json.dumps(u.to_json()))
    out = tmp_path / "t.json"
    assert main(["transport", "--input", str(src), "-o", str(out), "--scheme", "cf4"]) == 0
    data = json.loads(out.read_text())
    assert data["step_count"] == 64 and data["integrator_id"] == "cf4"
    assert data["unitarity_drift"] < 1e-13
    assert main(["transport", "--group", "so3", "--grid", "32", "-o", str(out), "--include-path"]) == 0
    assert len(json.loads(out.read_text())["path"]) == 33
    assert main(["transport"]) == 2


def test_spectrum_subcommand(capsys):
    assert main(["spectrum", "--group", "su2", "--angles", "0.5,-0.5", "--K", "1", "--analytic-only"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    vals = sorted(float(r["eigenvalue"]) for r in rows)
    assert vals == pytest.approx([-1 / (2 * math.pi), 0.0, 1 / (2 * math.pi)], abs=1e-15)
    assert {r["source"] for r in rows} == {"analytic"}


def test_traces_subcommand(capsys):
    assert main(["traces", "--group", "su2", "--angles", "0.5,-0.5", "--K", "64"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hlo_trace"]["value"] == 0.0
    assert out["trace_square"]["total"] == pytest.approx(1 / 6, abs=1e-12)
    assert main(["traces", "--example", "--m-max", "100000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hlo_trace"]["verdict"] == "diverges" and out["flags"]


def test_holonomy_subcommand(tmp_path):
    cfg = tmp_path / "h.ini"
    cfg.write_text("[holonomy]\ngroup = su2\nbase = torus\nN = 256\nseed = 1\nrandom_amplitude = 0.3\n"
                   "reference = pure_gauge\nloop_x0 = [0.5, 0.5]\nloop_cos = [[0.1, 0.0]]\n"
                   "loop_sin = [[0.0, 0.1]]\n")
    out = tmp_path / "h.json"
    assert main(["holonomy", "--config", str(cfg), "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["factorization_residual"] < 1e-8
    assert data["homothety"]["ratio_error"] < 1e-10
    cfg.write_text("[holonomy]\nbase = cylinder\n")
    assert main(["holonomy", "--config", str(cfg)]) == 2


def test_isoparametric_subcommand(capsys):
    assert main(["isoparametric", "--point", "--K", "1", "--grid", "32"]) == 0
    assert json.loads(capsys.readouterr().out)["distance"] < 1e-4
