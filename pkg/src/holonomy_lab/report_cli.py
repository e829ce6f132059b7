"""
Suite configuration, orchestration, reports and plot data.

A suite file is INI-style.  ``[run]`` holds run-level settings and every
``[case <id>]`` section names a ``module`` and ``operation`` from
:mod:`holonomy_lab.cases`, a ``tolerance``, a ``seed`` and any number of
parameters.  Values are Python literals; arithmetic on numbers and the names
``pi``, ``e`` and ``inf`` is allowed (``radius = pi / 4``).
"""

from __future__ import annotations

import ast
import configparser
import csv
import datetime
import hashlib
import json
import logging
import math
import operator
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import cases as case_registry
from .errors import ConfigError, HolonomyLabError

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
RESERVED_KEYS = ("module", "operation", "tolerance", "seed", "compare", "skip", "description")
VOLATILE_KEYS = ("timestamp", "timing")  # excluded from determinism comparisons


# ---------------------------------------------------------------------------
# values


_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval_node(node):
    if isinstance(node, ast.Constant) and (node.value is None or isinstance(node.value, (int, float, str))):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval_node(x) for x in node.elts]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval_node(node.operand))
    raise ValueError(f"unsupported expression element {type(node).__name__}")


def parse_value(text: str):
    """Literal or simple arithmetic value; bare words are returned as strings."""
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return _eval_node(ast.parse(text, mode="eval").body)
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError):
        if re.fullmatch(r"[A-Za-z_][\w.\-]*", text):
            return text
        raise


# ---------------------------------------------------------------------------
# configuration


@dataclass
class VerificationCase:
    id: str
    module: str
    operation: str
    parameters: dict
    tolerance: float
    seed: int
    compare: str = "max"  # "max": measured <= tolerance; "min": measured >= tolerance
    skip: bool = False
    description: str = ""

    def matches(self, tokens) -> bool:
        if not tokens:
            return True
        hay = f"{self.id} {self.module}.{self.operation}".lower()
        return any(t in hay for t in tokens)


@dataclass
class SuiteConfig:
    path: str
    run: dict
    cases: list

    @property
    def seed(self) -> int:
        return int(self.run.get("seed", 0))


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to 1-based line numbers."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[(.+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None and not line[:1].isspace():
            out[(section, m.group(1).strip())] = i
    return out


def _derived_seed(run_seed: int, case_id: str) -> int:
    h = hashlib.sha256(f"{run_seed}:{case_id}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def parse_config(text: str, path: str = "<string>") -> SuiteConfig:
    """Parse suite text; every error names the file and line."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep case: N and K are meaningful
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: key outside any section") from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.message.splitlines()[0]}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{path}:{lineno}: cannot parse line {line!r}") from None
    lines = _key_lines(text)

    def where(section, key=None):
        return f"{path}:{lines.get((section, key), lines.get((section, None), '?'))}"

    def values(section):
        out = {}
        for key, raw in cp.items(section):
            if key == "description":
                out[key] = raw.strip()
                continue
            try:
                out[key] = parse_value(raw)
            except Exception as exc:
                raise ConfigError(f"{where(section, key)}: bad value for {key!r}: {raw!r} ({exc})") from None
        return out

    run = values("run") if cp.has_section("run") else {}
    run_seed = run.get("seed", 0)
    if not isinstance(run_seed, int):
        raise ConfigError(f"{where('run', 'seed')}: seed must be an integer")
    cases = []
    for section in cp.sections():
        if section == "run":
            continue
        m = re.fullmatch(r"case\s+(\S+)", section)
        if not m:
            raise ConfigError(f"{where(section)}: unknown section [{section}]; expected [run] or [case <id>]")
        cid = m.group(1)
        vals = values(section)
        for req in ("module", "operation", "tolerance"):
            if req not in vals:
                raise ConfigError(f"{where(section)}: case {cid!r} is missing {req!r}")
        tol = vals["tolerance"]
        if isinstance(tol, bool) or not isinstance(tol, (int, float)):
            raise ConfigError(f"{where(section, 'tolerance')}: tolerance must be a number")
        seed = vals.get("seed", _derived_seed(run_seed, cid))
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"{where(section, 'seed')}: seed must be a 64-bit non-negative integer")
        compare = vals.get("compare", "max")
        if compare not in ("max", "min"):
            raise ConfigError(f"{where(section, 'compare')}: compare must be 'max' or 'min'")
        try:
            case_registry.lookup(str(vals["module"]), str(vals["operation"]))
        except ConfigError as exc:
            raise ConfigError(f"{where(section, 'operation')}: {exc}") from None
        params = {k: v for k, v in vals.items() if k not in RESERVED_KEYS}
        cases.append(VerificationCase(cid, str(vals["module"]), str(vals["operation"]), params, float(tol),
                                      seed, compare, bool(vals.get("skip", False)),
                                      str(vals.get("description", ""))))
    return SuiteConfig(path, run, cases)


def load_config(path) -> SuiteConfig:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def default_config_path() -> Path:
    return Path(str(resources.files("holonomy_lab").joinpath("default_config.ini")))


def parse_filter(expr: str | None) -> list[str]:
    """Comma- or whitespace-separated substrings; empty means everything."""
    if not expr:
        return []
    return [t.lower() for t in re.split(r"[,\s]+", expr.strip()) if t]


# ---------------------------------------------------------------------------
# running


@dataclass
class RunReport:
    cases: list
    environment: dict
    timestamp: str = ""
    timing: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def failed(self) -> list:
        return [c for c in self.cases if c["status"] == "fail"]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "timestamp": self.timestamp,
                "environment": self.environment, "cases": self.cases, "timing": self.timing}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def deterministic_json(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in VOLATILE_KEYS}
        return json.dumps(_jsonable(d), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d.get("cases", []), d.get("environment", {}), d.get("timestamp", ""),
                   d.get("timing", {}), d.get("schema_version", SCHEMA_VERSION))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)  # JSON has no inf/nan
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def worker_count(requested: int | None = None) -> int:
    """Pool size: requested (or CPU count), capped by HOLONOMY_LAB_THREADS."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("HOLONOMY_LAB_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"HOLONOMY_LAB_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def run_case(case: VerificationCase) -> tuple[dict, float]:
    """Execute one case; returns its report entry and the elapsed seconds."""
    entry = {"id": case.id, "module": case.module, "operation": case.operation, "seed": case.seed,
             "tolerance": case.tolerance, "compare": case.compare, "parameters": case.parameters,
             "artifacts": []}
    if case.skip:
        entry.update(status="skip", measured=None)
        return entry, 0.0
    fn = case_registry.lookup(case.module, case.operation)
    rng = np.random.default_rng(case.seed)
    t0 = time.perf_counter()
    try:
        out = fn(dict(case.parameters), rng, seed=case.seed)
    except HolonomyLabError as exc:
        entry.update(status="fail", measured=math.inf, error=f"{type(exc).__name__}: {exc}")
        return entry, time.perf_counter() - t0
    elapsed = time.perf_counter() - t0
    measured = float(out.measured)
    if out.passed is not None:
        ok = bool(out.passed)
    elif case.compare == "min":
        ok = measured >= case.tolerance
    else:
        ok = measured <= case.tolerance
    entry.update(status="pass" if ok else "fail", measured=measured, details=out.details)
    if out.series:
        entry["series"] = out.series
    return entry, elapsed


def _environment(config: SuiteConfig, selected) -> dict:
    grids, truncations, groups = set(), set(), set()
    for c in selected:
        p = c.parameters
        if "N" in p:
            grids.add(int(p["N"]))
        if "K" in p:
            truncations.add(int(p["K"]))
        g = p.get("groups", ())
        groups.update([g] if isinstance(g, str) else g)
    return {"grid_N": sorted(grids), "truncation_K": sorted(truncations), "group_ids": sorted(groups),
            "version": __version__, "numpy": np.__version__, "run_seed": config.seed,
            "config": os.path.basename(config.path)}


def run_suite(config, filter_expr: str | None = None, out_dir=None, threads: int | None = None,
              plots: bool = True) -> RunReport:
    """Run the matching cases; writes ``report.json`` (and plot data) into ``out_dir`` when given."""
    if not isinstance(config, SuiteConfig):
        config = load_config(config)
    tokens = parse_filter(filter_expr)
    selected = [c for c in config.cases if c.matches(tokens)]
    for t in tokens:
        if not any(c.matches([t]) for c in config.cases):
            raise ConfigError(f"filter token {t!r} matches no case id")
    case_registry.clear_cache()
    started = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    n = worker_count(threads or config.run.get("threads") or None)
    with ThreadPoolExecutor(max_workers=n) as pool:
        results = list(pool.map(run_case, selected))
    case_registry.clear_cache()
    entries = sorted((r[0] for r in results), key=lambda e: e["id"])
    timing = {c.id: round(r[1], 3) for c, r in zip(selected, results)}
    timing["total"] = round(time.perf_counter() - t0, 3)
    timing["workers"] = n
    report = RunReport(entries, _environment(config, selected), started, timing)
    if out_dir is not None:
        write_report(report, out_dir, plots)
    return report


def write_report(report: RunReport, out_dir, plots: bool = True) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if plots:
            emit_plots(report, out)
        path = out / "report.json"
        path.write_text(report.to_json())
    except OSError as exc:
        raise HolonomyLabError(f"cannot write report to {out}: {exc.strerror}") from None
    return path


def summary_lines(report: RunReport) -> list[str]:
    lines = []
    for c in report.cases:
        m = c["measured"]
        ms = "-" if m is None else f"{m:.3e}"
        rel = ">=" if c["compare"] == "min" else "<="
        lines.append(f"{c['status'].upper():4s}  {c['id']:40s} measured {ms}  (need {rel} {c['tolerance']:.1e})")
    n_fail = len(report.failed)
    lines.append(f"{len(report.cases)} cases, {n_fail} failed")
    return lines


# ---------------------------------------------------------------------------
# plot data


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _convergence_plot(out: Path, data: list) -> list[Path]:
    csv_path = out / "convergence.csv"
    rows = [(d["scheme"], d["group"], N, e) for d in data for N, e in zip(d["grids"], d["errors"])]
    _write_csv(csv_path, ["scheme", "group", "N", "error"], rows)
    gp = out / "convergence.gp"
    blocks = []
    for i, d in enumerate(data):
        blocks.append(f"'< grep \"^{d['scheme']},\" convergence.csv' using 3:4 with linespoints "
                      f"title '{d['scheme']} ({d['group']}): order {d['order']:.3f}'")
    gp.write_text(
        "set datafile separator ','\nset logscale xy\nset xlabel 'N'\nset ylabel 'endpoint error'\n"
        "set title 'self-convergence (slope = fitted order)'\n"
        "set terminal pngcairo size 800,600\nset output 'convergence.png'\n"
        "plot " + ", \\\n     ".join(blocks) + "\n")
    return [csv_path, gp]


def _spectrum_plot(out: Path, data: dict) -> list[Path]:
    csv_path = out / "spectrum.csv"
    rows = [(i, a, b) for i, (a, b) in enumerate(zip(data["analytic"], data["numeric"]))]
    _write_csv(csv_path, ["index", "analytic", "numeric"], rows)
    gp = out / "spectrum.gp"
    gp.write_text(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'index (descending)'\n"
        f"set ylabel 'eigenvalue'\nset title 'fibre shape operator, {data['group']}'\n"
        "set terminal pngcairo size 800,600\nset output 'spectrum.png'\n"
        "plot 'spectrum.csv' using 1:2 with points pt 7, '' using 1:3 with points pt 6\n")
    return [csv_path, gp]


def _partial_sum_plot(out: Path, data: dict) -> list[Path]:
    csv_path = out / "trace_partial_sums.csv"
    g = float(np.euler_gamma)
    rows = [(m, math.log(m), s, math.log(m) + g) for m, s in zip(data["m"], data["partial_sums"])]
    _write_csv(csv_path, ["m", "ln_m", "partial_sum", "ln_m_plus_gamma"], rows)
    gp = out / "trace_partial_sums.gp"
    gp.write_text(
        "set datafile separator ','\nset key autotitle columnhead left\nset xlabel 'ln m'\n"
        "set ylabel 'partial sum'\nset title 'paired trace partial sums'\n"
        "set terminal pngcairo size 800,600\nset output 'trace_partial_sums.png'\n"
        "plot 'trace_partial_sums.csv' using 2:3 with points pt 7, '' using 2:4 with lines\n")
    return [csv_path, gp]


def _zeta_plot(out: Path, data: dict) -> list[Path]:
    csv_path = out / "zeta_probe.csv"
    rows = [(s, v, data["reference_bound"]) for s, v in zip(data["s"], data["values"])]
    _write_csv(csv_path, ["s", "value", "reference_bound"], rows)
    gp = out / "zeta_probe.gp"
    gp.write_text(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\nset xlabel 's'\n"
        "set ylabel 'sum (2/k)^s - (1/k)^s'\nset title 'zeta-regularized trace probe'\n"
        "set terminal pngcairo size 800,600\nset output 'zeta_probe.png'\n"
        "plot 'zeta_probe.csv' using 1:2 with linespoints pt 7, '' using 1:3 with lines\n")
    return [csv_path, gp]


_PLOTTERS = {"convergence": _convergence_plot, "spectrum": _spectrum_plot,
             "partial_sums": _partial_sum_plot, "zeta_probe": _zeta_plot}


def emit_plots(report: RunReport, out_dir) -> list[str]:
    """Write CSV data and gnuplot scripts for every plot kind present in the report.

    Each kind is emitted once, from the first case (by id) that carries it;
    the file names are recorded in that case's ``artifacts``.
    """
    out = Path(out_dir)
    written = []
    done = set()
    for c in report.cases:
        for kind, data in (c.get("series") or {}).items():
            if kind in done or kind not in _PLOTTERS:
                continue
            out.mkdir(parents=True, exist_ok=True)
            paths = _PLOTTERS[kind](out, data)
            names = [p.name for p in paths]
            c["artifacts"] = sorted(set(c.get("artifacts", [])) | set(names))
            written += names
            done.add(kind)
    return written
