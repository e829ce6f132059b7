"""Command-line entry point ``holonomy-lab``."""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, HolonomyLabError
from .report_cli import (RunReport, _jsonable, default_config_path, emit_plots, load_config, parse_value,
                         run_suite, summary_lines)
from .serialization import matrix_to_json

log = logging.getLogger("holonomy_lab")


def _emit(obj, path: str | None):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    cfg = load_config(args.config or default_config_path())
    report = run_suite(cfg, args.filter, args.out, args.threads, plots=not args.no_plots)
    for line in summary_lines(report):
        print(line)
    if args.out:
        print(f"report written to {Path(args.out) / 'report.json'}")
    return report.exit_code


def cmd_transport(args) -> int:
    from .loop_space import AlgebraLoop
    from .transport import solve_transport
    if args.input:
        data = json.loads(Path(args.input).read_text())
        u = AlgebraLoop.from_json(data)
    else:
        if not args.group:
            raise ConfigError("give --input LOOP.json or --group to draw a seeded random loop")
        u = AlgebraLoop.random(args.group, np.random.default_rng(args.seed), args.grid or 1024, args.K,
                               args.amplitude)
    if args.grid and args.grid != u.N:
        u = u.resample(args.grid)
    sol = solve_transport(u, args.scheme)
    out = {"group_id": u.group_id, "integrator_id": sol.integrator_id, "step_count": sol.step_count,
           "closed": u.closed, "endpoint": matrix_to_json(sol.endpoint.matrix),
           "residual": sol.residual(), "unitarity_drift": sol.unitarity_drift()}
    if args.include_path:
        out["path"] = [matrix_to_json(m) for m in sol.path.samples]
    _emit(out, args.output)
    return 0


def _holonomy_setup(path: str):
    """Read a ``[holonomy]`` section; see README for the keys."""
    from .bundle_geometry import (AmbientPolynomialField, BaseLoop, FlatTorus, GaugeTransformation,
                                  RoundSphere, SphereAmbientForm, TorusFourierField, TorusFourierForm,
                                  ZeroForm, pure_gauge)
    from .lie_core import get_group
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not cp.has_section("holonomy"):
        raise ConfigError(f"{path}: missing [holonomy] section")
    p = {}
    for k, raw in cp.items("holonomy"):
        try:
            p[k] = parse_value(raw)
        except Exception:
            raise ConfigError(f"{path}: bad value for {k!r}: {raw!r}") from None
    gid = p.get("group", "su2")
    g = get_group(gid)
    rng = np.random.default_rng(int(p.get("seed", 0)))
    kind = p.get("base", "torus")
    amp = float(p.get("random_amplitude", 0.0))
    if kind == "torus":
        L1, L2 = p.get("periods", [1.0, 1.0])
        base = FlatTorus(float(L1), float(L2))
        const = np.asarray(p.get("constant_coords", np.zeros((2, g.dim))), float).reshape(2, g.dim)
        omega = TorusFourierForm.constant(gid, base, g.from_coords(const[0]), g.from_coords(const[1]))
        if amp > 0:
            omega = omega + TorusFourierForm.random(gid, base, rng, int(p.get("random_modes", 1)), amp)
        ref_field = lambda: TorusFourierField.random(gid, base, rng, int(p.get("random_modes", 1)),  # noqa: E731
                                                     float(p.get("reference_amplitude", 0.3)))
    elif kind == "sphere":
        base = RoundSphere(float(p.get("radius", 1.0)))
        omega = SphereAmbientForm.random(gid, base, rng, int(p.get("random_degree", 2)), amp or 0.3)
        ref_field = lambda: AmbientPolynomialField.random(gid, base, rng, int(p.get("random_degree", 2)),  # noqa: E731
                                                          float(p.get("reference_amplitude", 0.3)))
    else:
        raise ConfigError(f"{path}: base must be 'torus' or 'sphere', got {kind!r}")
    ref = p.get("reference", "zero")
    if ref == "zero":
        omega0 = ZeroForm(gid, base)
    elif ref == "pure_gauge":
        omega0 = pure_gauge(GaugeTransformation(ref_field()), base)
        omega = omega + omega0
    else:
        raise ConfigError(f"{path}: reference must be 'zero' or 'pure_gauge'")
    loop = BaseLoop(base, p.get("loop_x0", [0.0, 0.0]), p.get("loop_winding", [0.0, 0.0]),
                    p.get("loop_cos", []), p.get("loop_sin", []), p.get("speed"), p.get("chart", "north"))
    return p, gid, rng, omega, omega0, loop


def cmd_holonomy(args) -> int:
    from .bundle_geometry import check_homothety, hol_c, hol_direct, horizontal_lift
    from .loop_space import AlgebraLoop
    p, gid, rng, omega, omega0, c = _holonomy_setup(args.config)
    N = int(args.grid or p.get("N", 1024))
    sigma = horizontal_lift(c, omega0, N)
    hol = hol_c(omega, c, omega0, N, args.scheme, sigma)
    direct = hol_direct(omega, c, omega0, N)
    xi = AlgebraLoop.random(gid, rng, N, int(p.get("profile_K", 4)), 1.0)
    homo = check_homothety(c, xi, omega0, sigma)
    _emit({"group_id": gid, "N": N, "scheme": args.scheme, "speed": c.speed,
           "holonomy": matrix_to_json(hol), "holonomy_direct": matrix_to_json(direct),
           "factorization_residual": float(np.linalg.norm(hol - direct)),
           "homothety": homo.as_dict()}, args.output)
    return 0


def _group_vector(args):
    from .lie_core import generic_torus_vector, get_group
    g = get_group(args.group)
    if args.angles:
        return g.torus_vector([float(x) for x in args.angles.split(",")])
    return generic_torus_vector(args.group, np.random.default_rng(args.seed))


def cmd_spectrum(args) -> int:
    from .fiber_spectra import analytic_fiber_spectrum, numeric_shape_operator
    v = _group_vector(args)
    tables = [analytic_fiber_spectrum(v, args.K, args.group)]
    if not args.analytic_only:
        tables.append(numeric_shape_operator(v, args.K, args.eps, args.grid or 128, args.group, args.scheme))
    fh = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(["eigenvalue", "multiplicity", "label", "source"])
        for t in tables:
            for ev, mult, label, source in t.rows():
                w.writerow([repr(float(ev)), mult, label, source])
    finally:
        if fh is not sys.stdout:
            fh.close()
    if len(tables) == 2:
        log.info("multiset distance analytic vs numeric: %.3e", tables[0].distance(tables[1]))
    return 0


def cmd_traces(args) -> int:
    from .fiber_spectra import (EXAMPLE_ZETA_BOUND, analytic_fiber_spectrum, regularized_traces, trace_square,
                                two_sequence_example)
    if args.example:
        rep = regularized_traces(None, two_sequence_example(), m_max=args.m_max, reference_bound=EXAMPLE_ZETA_BOUND)
        out = rep.as_dict()
    else:
        v = _group_vector(args)
        rep = regularized_traces(analytic_fiber_spectrum(v, args.K, args.group))
        out = rep.as_dict()
        out["trace_square"] = trace_square(v, args.K, args.group)
    out["ls_norms"] = {str(k): val for k, val in out["ls_norms"].items()}
    _emit(out, args.output)
    return 0


def cmd_isoparametric(args) -> int:
    from .fiber_spectra import isoparametric_probe
    spec = {"kind": "point"} if args.point else {"kind": "distance_sphere", "radius": parse_value(args.radius)}
    rep = isoparametric_probe(spec, args.K, args.points, args.seed, args.grid or 128)
    _emit(rep, args.output)
    return 0


def cmd_plots(args) -> int:
    data = json.loads(Path(args.report).read_text())
    report = RunReport.from_dict(data)
    names = emit_plots(report, args.out)
    for n in names:
        print(Path(args.out) / n)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holonomy-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"holonomy-lab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--config", help="suite file (default: the packaged suite)")
    p.add_argument("--filter", default="", help="comma-separated substrings of case ids")
    p.add_argument("--out", help="directory for report.json and plot data")
    p.add_argument("--threads", type=int, default=None, help="worker count (capped by HOLONOMY_LAB_THREADS)")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_verify)

    schemes = ["rkmk4", "magnus4", "cf4"]
    p = sub.add_parser("transport", help="transport along an algebra loop")
    p.add_argument("--input", help="AlgebraLoop JSON")
    p.add_argument("--group", help="draw a seeded random loop in this group instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--scheme", choices=schemes, default="rkmk4")
    p.add_argument("--grid", type=int, help="resample the loop to N intervals")
    p.add_argument("--include-path", action="store_true")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_transport)

    p = sub.add_parser("holonomy", help="holonomy, factorization residual and homothety report")
    p.add_argument("--config", required=True)
    p.add_argument("--scheme", choices=schemes, default="rkmk4")
    p.add_argument("--grid", type=int)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_holonomy)

    for name, fn, hlp in (("spectrum", cmd_spectrum, "fibre shape-operator spectra as CSV"),
                          ("traces", cmd_traces, "regularized traces as JSON")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--group", choices=["su2", "su3", "so3"], default="su2")
        p.add_argument("--angles", help="torus phases of v, comma separated (default: seeded generic vector)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--K", type=int, default=4)
        p.add_argument("--output", "-o")
        p.set_defaults(func=fn)
        if name == "spectrum":
            p.add_argument("--eps", type=float, default=1e-4)
            p.add_argument("--grid", type=int)
            p.add_argument("--scheme", choices=schemes, default="rkmk4")
            p.add_argument("--analytic-only", action="store_true")
        else:
            p.add_argument("--example", action="store_true", help="the 2/k, 1/k two-sequence spectrum")
            p.add_argument("--m-max", type=int, default=10 ** 6)

    p = sub.add_parser("isoparametric", help="spectral constancy along a preimage")
    p.add_argument("--radius", default="pi/4")
    p.add_argument("--point", action="store_true", help="preimage of a point instead of a distance sphere")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--points", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_isoparametric)

    p = sub.add_parser("plots", help="write CSV and gnuplot scripts from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plots)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HolonomyLabError as exc:
        print(f"holonomy-lab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"holonomy-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
