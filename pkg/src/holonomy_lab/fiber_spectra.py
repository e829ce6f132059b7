"""
Shape operators of the transport fibres and regularized traces.

The fibre through the zero loop is ``phi^{-1}(e)``; a constant loop ``v`` is
normal to it there, and its shape operator is diagonal in the orthonormal
loop basis with eigenvalue ``-alpha(v) / (2 k pi)`` on each root loop of mode
``k`` and ``0`` on the torus loops.  This module tabulates that spectrum,
recomputes it numerically from the horizontal-lift field, and evaluates the
trace functionals that decide minimality and regularizability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from .errors import DegeneracyError, DomainError, TruncationError
from .lie_core import (AlgebraVector, TorusDecomposition, generic_torus_vector, get_group,
                       root_decomposition)
from .loop_space import AlgebraLoop, BasisLabel, GroupPath, LoopBasis, gauge_act
from .transport import horizontal_lift, jacobian_batch, phi, transport_batch

# the bound on the zeta-regularized trace quoted for the two-sequence example
EXAMPLE_ZETA_BOUND = 1.0 + 2.0 * math.log(2.0)
EULER_GAMMA = float(np.euler_gamma)


@dataclass
class SpectrumEntry:
    eigenvalue: float
    multiplicity: int
    label: object = "numeric"

    def __post_init__(self):
        if self.multiplicity <= 0:
            raise DomainError("multiplicities must be positive")


@dataclass
class SpectrumTable:
    """Eigenvalues with multiplicities, sorted descending."""

    entries: list = field(default_factory=list)
    source: str = "analytic"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: (-e.eigenvalue, str(e.label)))

    def eigenvalues(self) -> np.ndarray:
        """The expanded multiset, sorted descending."""
        vals = [e.eigenvalue for e in self.entries for _ in range(e.multiplicity)]
        return np.array(vals, dtype=float)

    def __len__(self):
        return int(sum(e.multiplicity for e in self.entries))

    def distance(self, other: "SpectrumTable") -> float:
        """Max gap between the sorted multisets (inf when sizes differ)."""
        a, b = self.eigenvalues(), other.eigenvalues()
        if len(a) != len(b):
            return math.inf
        return float(np.max(np.abs(a - b))) if len(a) else 0.0

    def rows(self):
        for e in self.entries:
            yield (e.eigenvalue, e.multiplicity, str(e.label), self.source)


def _decomposition(v, group_id=None) -> TorusDecomposition:
    if isinstance(v, TorusDecomposition):
        return v
    return root_decomposition(v, group_id)


def analytic_fiber_spectrum(v, K: int, group_id: str | None = None) -> SpectrumTable:
    """Shape-operator spectrum of the fibre at the zero loop in the normal direction ``v``.

    One entry per root and mode ``k`` in ``+-1..+-K`` with multiplicity
    ``2 m_alpha`` (the two loops l1, l2), plus zeros for every torus loop.
    """
    d = _decomposition(v, group_id)
    entries = []
    for j, r in enumerate(d.roots):
        for k in range(1, K + 1):
            for kk in (k, -k):
                lam = -r.alpha_value / (2 * kk * math.pi)
                entries.append(SpectrumEntry(lam, 2, BasisLabel("l1", j, kk, "root")))
    for j in range(len(d.flat_basis())):
        for k in range(1, K + 1):
            entries.append(SpectrumEntry(0.0, 2, BasisLabel("l1", j, k, "flat")))
    return SpectrumTable(entries, "analytic")


def cluster_eigenvalues(values, tol: float = 1e-6) -> list[SpectrumEntry]:
    vals = np.sort(np.asarray(values, float))[::-1]
    entries: list[SpectrumEntry] = []
    group: list[float] = []
    for x in vals:
        if group and abs(x - group[0]) > tol:
            entries.append(SpectrumEntry(float(np.mean(group)), len(group)))
            group = []
        group.append(float(x))
    if group:
        entries.append(SpectrumEntry(float(np.mean(group)), len(group)))
    return entries


def _min_norm_lift(jac: np.ndarray, v: np.ndarray, cond_limit: float = 1e10) -> np.ndarray:
    """Frame coefficients ``c`` of least norm with ``jac.T @ c = v`` (frame assumed orthonormal)."""
    gram = jac.T @ jac
    if np.linalg.cond(gram) > cond_limit:
        raise TruncationError("differential is ill-conditioned on this frame; raise K")
    return jac @ np.linalg.solve(gram, v)


def shape_operator_matrix(group_id: str, point: np.ndarray, frame: np.ndarray, tangent: np.ndarray,
                          normal_coords: np.ndarray, eps: float = 1e-4, jac_eps: float = 1e-3,
                          scheme: str = "rkmk4") -> np.ndarray:
    """Matrix of ``X -> -(D_X nu)^T`` on the tangent frame members.

    ``nu(u)`` is the least-norm preimage of the fixed left-translated vector
    ``normal_coords`` under ``d phi_u`` within the span of ``frame``; it is
    differenced along each tangent frame loop at ``point``.
    """
    frame = np.asarray(frame)
    tangent = np.asarray(tangent)
    pts = []
    for i in tangent:
        pts.append(point + eps * frame[i])
        pts.append(point - eps * frame[i])
    jac = jacobian_batch(group_id, np.array(pts), frame, jac_eps, 4, scheme)
    lifts = np.array([_min_norm_lift(J, normal_coords) for J in jac])
    deriv = (lifts[0::2] - lifts[1::2]) / (2 * eps)  # row j: derivative along tangent[j]
    return -deriv[:, tangent].T


def numeric_shape_operator(v, K: int = 4, eps: float = 1e-4, N: int = 256, group_id: str | None = None,
                           scheme: str = "rkmk4", cluster_tol: float = 1e-6) -> SpectrumTable:
    """Shape operator of the fibre through the zero loop, from the horizontal-lift field."""
    if K > 8:
        raise DomainError("numeric shape operator supports K <= 8")
    if not 1e-5 <= eps <= 1e-3:
        raise DomainError("eps must lie in [1e-5, 1e-3]")
    if isinstance(v, AlgebraVector):
        group_id, v = v.group_id, v.matrix
    g = get_group(group_id)
    v = np.asarray(v, dtype=g.dtype)
    # the loop basis only needs some generic torus frame; v itself may be zero
    try:
        d = root_decomposition(v, group_id)
    except (DegeneracyError, DomainError):
        d = root_decomposition(generic_torus_vector(group_id, np.random.default_rng(0)), group_id)
    basis = LoopBasis(d, K, N)
    frame = np.array(basis.matrices)
    tangent = basis.tangent_indices()
    zero = np.zeros((N + 1, g.n, g.n), g.dtype)
    mat = shape_operator_matrix(group_id, zero, frame, tangent, g.coords(v), eps, scheme=scheme)
    asym = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
    vals = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    table = SpectrumTable(cluster_eigenvalues(vals, cluster_tol), "numeric",
                          {"asymmetry": asym, "matrix": mat, "labels": [basis.labels[i] for i in tangent]})
    return table


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class PowerLawTail:
    """Eigenvalue tails ``lambda+_i = c_plus / i^p`` and ``lambda-_i = c_minus / i^p`` (magnitudes)."""

    c_plus: float
    c_minus: float
    p: float = 1.0
    start: int = 1

    def plus(self, i):
        return self.c_plus / np.asarray(i, float) ** self.p

    def minus(self, i):
        return self.c_minus / np.asarray(i, float) ** self.p

    def power_sum(self, s: float, sign_plus: float, sign_minus: float, start: int) -> float:
        """``sum_{i >= start} (sign_plus c_plus^s + sign_minus c_minus^s) / i^{p s}`` via Hurwitz zeta."""
        if self.p * s <= 1.0:
            return math.inf
        coef = sign_plus * self.c_plus ** s + sign_minus * self.c_minus ** s
        return float(coef * scipy.special.zeta(self.p * s, start))


def two_sequence_example() -> PowerLawTail:
    """Spectrum ``lambda+_k = 2/k``, ``lambda-_k = 1/k``."""
    return PowerLawTail(2.0, 1.0, 1.0)


@dataclass
class SeriesVerdict:
    verdict: str  # "value", "diverges" or "inconclusive"
    value: float | None = None
    slope: float | None = None
    r_squared: float | None = None
    evidence: dict = field(default_factory=dict)


@dataclass
class TraceReport:
    ls_norms: dict
    hlo_trace: SeriesVerdict
    zeta_trace: SeriesVerdict
    partial_sum_count: int
    flags: list = field(default_factory=list)

    def as_dict(self):
        def conv(x):
            if isinstance(x, SeriesVerdict):
                return {k: conv(v) for k, v in x.__dict__.items()}
            if isinstance(x, dict):
                return {str(k): conv(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [conv(v) for v in x]
            if isinstance(x, np.generic):
                return x.item()
            return x
        return conv(dict(self.__dict__))


def log_fit(m: np.ndarray, s: np.ndarray) -> tuple[float, float, float]:
    """Least-squares fit ``s = a ln m + b``; returns ``(a, b, R^2)``."""
    x = np.log(np.asarray(m, float))
    y = np.asarray(s, float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def divergence_verdict(m: np.ndarray, partial: np.ndarray, r2_min: float = 0.999,
                       slope_band: float = 0.1, settle_tol: float = 1e-9) -> SeriesVerdict:
    """Classify partial sums sampled at increasing ``m``.

    Divergence is declared when partial sums are fitted by ``a ln m + b`` with
    ``R^2 > r2_min`` and ``a`` within ``slope_band`` (relative) of 1; a sequence
    whose last samples agree within ``settle_tol`` is reported as a value.
    """
    a, b, r2 = log_fit(m, partial)
    evidence = {"m": [int(x) for x in m], "partial_sums": [float(x) for x in partial]}
    if r2 > r2_min and abs(a - 1.0) <= slope_band:
        return SeriesVerdict("diverges", None, a, r2, evidence)
    if abs(partial[-1] - partial[-2]) <= settle_tol * max(1.0, abs(partial[-1])):
        return SeriesVerdict("value", float(partial[-1]), a, r2, evidence)
    return SeriesVerdict("inconclusive", None, a, r2, evidence)


def _split_signs(table: SpectrumTable | None):
    if table is None or not table.entries:
        return np.zeros(0), np.zeros(0)
    ev = table.eigenvalues()
    pos = np.sort(ev[ev > 0])[::-1]
    neg = np.sort(-ev[ev < 0])[::-1]
    return pos, neg


def regularized_traces(table: SpectrumTable | None, tail: PowerLawTail | None = None,
                       s_grid=(1.1, 1.5, 2.0, 3.0, math.inf),
                       zeta_probe=(1.1, 1.05, 1.01, 1.001),
                       m_max: int = 10 ** 6, reference_bound: float | None = None) -> TraceReport:
    """L^s norms, the paired (HLO) trace and the zeta-regularized trace probe.

    Without a tail the table is treated as the whole (finite) spectrum and all
    sums are exact; the paired trace is then an ``fsum`` so that an exactly
    symmetric spectrum gives exactly zero.  With a tail the table is ignored
    beyond its own eigenvalues and the series are probed up to ``m_max``.
    """
    if (table is None or not table.entries) and tail is None:
        raise DomainError("empty spectrum table")
    if tail is not None and m_max < 100:
        raise DomainError(f"m_max must be at least 100, got {m_max}")
    flags = []
    pos, neg = _split_signs(table)
    allv = np.concatenate([pos, neg])
    if tail is None:
        norms = {}
        for s in s_grid:
            norms[s] = float(np.max(allv)) if math.isinf(s) else float(np.sum(allv ** s) ** (1.0 / s))
        hlo = SeriesVerdict("value", math.fsum(table.eigenvalues().tolist()))
        zvals = [math.fsum(list(pos ** s) + list(-(neg ** s))) for s in zeta_probe]
        zeta = SeriesVerdict("value", hlo.value, evidence={"s": list(zeta_probe), "values": zvals})
        return TraceReport(norms, hlo, zeta, len(allv), flags)

    # tail-driven spectrum: the table (if any) is ignored in favour of the model
    start = tail.start
    norms = {}
    for s in s_grid:
        if math.isinf(s):
            norms[s] = float(max(tail.c_plus, tail.c_minus) / start ** tail.p)
        else:
            total = tail.power_sum(s, 1.0, 1.0, start)
            norms[s] = total ** (1.0 / s) if math.isfinite(total) else math.inf
    i = np.arange(start, start + m_max, dtype=float)
    partial = np.cumsum(tail.plus(i) - tail.minus(i))
    idx = np.unique(np.geomspace(1, m_max, 61).astype(int)) - 1
    sample_m = idx + 1
    # fit the log-growth past the transient, keeping at least a decade of samples
    fit = sample_m >= min(1000, m_max // 10)
    hlo = divergence_verdict(sample_m[fit], partial[idx][fit])
    hlo.evidence["final_partial_sum"] = float(partial[-1])
    hlo.evidence["ln_m_plus_gamma"] = math.log(m_max) + EULER_GAMMA

    zvals, zpartial = [], []
    for s in zeta_probe:
        head_i = np.arange(start, start + 1000, dtype=float)
        head = math.fsum((tail.plus(head_i) ** s - tail.minus(head_i) ** s).tolist())
        rest = tail.power_sum(s, 1.0, -1.0, start + 1000)
        zvals.append(head + rest)
        zpartial.append(head)
    zvals_arr = np.array(zvals)
    gaps = 1.0 / (np.array(zeta_probe) - 1.0)
    ev = {"s": list(zeta_probe), "values": [float(x) for x in zvals]}
    if np.all(np.diff(zvals_arr) > 0) and np.all(zvals_arr > 0):
        a, b = np.polyfit(np.log(gaps), np.log(zvals_arr), 1)
        ev["growth_exponent"] = float(a)
        if a > 0.5:
            zeta = SeriesVerdict("diverges", None, float(a), None, ev)
        else:
            zeta = SeriesVerdict("inconclusive", None, float(a), None, ev)
    elif abs(zvals_arr[-1] - zvals_arr[-2]) < 1e-6:
        zeta = SeriesVerdict("value", float(zvals_arr[-1]), evidence=ev)
    else:
        zeta = SeriesVerdict("inconclusive", evidence=ev)
    if reference_bound is not None:
        exceed = [s for s, z in zip(zeta_probe, zvals) if z > reference_bound]
        if exceed or zeta.verdict == "diverges":
            flags.append({
                "kind": "zeta_trace_exceeds_reference_bound",
                "reference_bound": reference_bound,
                "s_exceeding": exceed,
                "note": "probe values grow without bound as s decreases to 1; "
                        "the quoted bound is not reproduced",
            })
    return TraceReport(norms, hlo, zeta, m_max, flags)


def trace_square(v, K: int, group_id: str | None = None) -> dict:
    """Sum of squared shape-operator eigenvalues: truncated table, analytic tail and closed form."""
    if isinstance(v, AlgebraVector):
        group_id, v = v.group_id, v.matrix
    g = get_group(group_id)
    v = np.asarray(v, dtype=g.dtype)
    if float(g.norm(v)) == 0.0:
        return {"partial": 0.0, "tail": 0.0, "total": 0.0, "closed_form": 0.0, "tail_bound": 0.0}
    d = _decomposition(v, group_id)
    table = analytic_fiber_spectrum(d, K)
    partial = math.fsum(e.eigenvalue ** 2 * e.multiplicity for e in table.entries)
    weight = math.fsum(r.alpha_value ** 2 for r in d.roots)  # one datum per root vector
    # sum over |k| > K of 2 m alpha^2 / (4 k^2 pi^2) = m alpha^2 / pi^2 * psi'(K + 1)
    tail = weight / math.pi ** 2 * float(scipy.special.polygamma(1, K + 1))
    return {"partial": partial, "tail": tail, "total": partial + tail,
            "closed_form": weight / 6.0, "tail_bound": weight / (math.pi ** 2 * K)}


# ---------------------------------------------------------------------------
# isoparametric probe


def _orthonormal_frame(frame: np.ndarray, group, N: int, rel_tol: float = 1e-10) -> np.ndarray:
    """L2-orthonormal combinations of frame loops, dropping dependent directions."""
    c = group.coords(frame)
    wts = np.full(N + 1, 1.0 / N)
    wts[[0, -1]] *= 0.5  # trapezoid: frame members need not be periodic
    gram = np.einsum("atd,t,btd->ab", c, wts, c)
    w, q = np.linalg.eigh(gram)
    keep = w > rel_tol * np.max(w)
    comb = (q[:, keep] / np.sqrt(w[keep])).T
    return np.einsum("am,m...->a...", comb, frame)


def _distance_gradient(group_id, points, frame, jac_eps, scheme):
    """Derivatives of ``u -> |log phi(u)|`` along each frame loop, ``(P, M)``, plus the distances."""
    g = get_group(group_id)
    jac = jacobian_batch(group_id, points, frame, jac_eps, 4, scheme, closed=False)
    x = g.coords(g.log(transport_batch(group_id, points, False, scheme)))
    dist = np.linalg.norm(x, axis=1)
    unit = x / np.maximum(dist, 1e-300)[:, None]
    return np.einsum("pmd,pd->pm", jac, unit), dist


def level_set_shape_operator(group_id: str, point: np.ndarray, frame: np.ndarray, eps: float = 1e-4,
                             jac_eps: float = 1e-3, scheme: str = "rkmk4", subspace=None) -> dict:
    """Shape operator of ``{u : |log phi(u)| = const}`` at ``point`` compressed to an orthonormal frame.

    Returns the gradient (frame coordinates), its norm, and the eigenvalues of
    ``-Hess|_T / |grad|`` on the frame directions orthogonal to the gradient.
    ``subspace`` (rows of frame coordinates) additionally yields the
    compression to its tangent part.
    """
    M = len(frame)
    pts = [point]
    for j in range(M):
        pts += [point + eps * frame[j], point - eps * frame[j]]
    grads, dist = _distance_gradient(group_id, np.array(pts), frame, jac_eps, scheme)
    grad = grads[0]
    hess = (grads[1::2] - grads[2::2]).T / (2 * eps)
    asym = float(np.max(np.abs(hess - hess.T)))
    hess = 0.5 * (hess + hess.T)
    gnorm = float(np.linalg.norm(grad))
    n = grad / gnorm
    # orthonormal basis of the gradient's complement
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(M)]))
    tang = q[:, 1:M]
    shape = -tang.T @ hess @ tang / gnorm
    vals = np.linalg.eigvalsh(0.5 * (shape + shape.T))[::-1]
    out = {"gradient": grad, "gradient_norm": gnorm, "distance": float(dist[0]),
           "eigenvalues": vals, "hessian_asymmetry": asym}
    if subspace is not None:
        # compress to the part of the subspace tangent to the level set
        sub = np.asarray(subspace, float).T
        sub = sub - np.outer(n, n @ sub)
        u_, sv, _ = np.linalg.svd(sub, full_matrices=False)
        qs = u_[:, sv > 1e-4 * sv[0]]
        comp = -qs.T @ hess @ qs / gnorm
        out["subspace_eigenvalues"] = np.linalg.eigvalsh(0.5 * (comp + comp.T))[::-1]
    return out


def _horizontal_loops(group, X: np.ndarray, N: int) -> np.ndarray:
    """Horizontal space at the constant loop ``X``: ``t -> Ad(exp((1 - t) X)) E_a``."""
    t = np.arange(N + 1) / N
    h = group.exp((1.0 - t)[:, None, None] * X)
    hi = group.inv(h)
    return np.stack([h @ b @ hi for b in group.basis])


def sphere_radius(group_id: str = "su2") -> float:
    """Radius of SU(2) viewed as a round 3-sphere under the library metric."""
    g = get_group(group_id)
    if group_id != "su2":
        raise DomainError("distance-sphere probe is implemented for su2")
    # a unit algebra vector generates a closed geodesic of length 2 pi R
    x = g.basis[0]
    period = 2 * np.pi / float(np.max(np.abs(np.linalg.eigvals(x).imag)))
    return period / (2 * np.pi)


def isoparametric_probe(M_spec: dict, K: int = 4, point_count: int = 3, seed: int = 0,
                        N: int = 128, metric_scale: float = 1.0, gauge_amplitude: float = 0.6,
                        transport_steps: int = 8, scheme: str = "rkmk4") -> dict:
    """Compare truncated shape-operator spectra of a preimage at several points.

    ``M_spec`` is ``{"kind": "distance_sphere", "radius": r}`` (SU(2)) or
    ``{"kind": "point"}``.  Points are gauge translates ``g_j . X`` of a
    constant loop ``X`` by seeded loops ``g_j``; the frame at each point is the
    gauge-transported truncated basis plus the horizontal space.  The unit
    normal is carried along ``tau -> exp(tau Z_j) . X`` with sign continuity.
    ``metric_scale`` multiplies all curvatures (preimages under a holonomy map
    whose pull-back map has homothety coefficient ``metric_scale``).
    """
    group_id = "su2"
    g = get_group(group_id)
    rng = np.random.default_rng(seed)
    d = root_decomposition(g.torus_vector([0.5, -0.5]), group_id)
    basis = LoopBasis(d, K, N)
    kind = M_spec.get("kind")
    if kind == "point":
        v = g.torus_vector(rng.uniform(0.3, 1.0, 2) * np.array([1.0, -1.0]))
        num = numeric_shape_operator(v, K, 1e-4, N, group_id, scheme)
        an = analytic_fiber_spectrum(v, K, group_id)
        return {"kind": "point", "distance": an.distance(num) * metric_scale,
                "numeric": (metric_scale * num.eigenvalues()).tolist(),
                "analytic": (metric_scale * an.eigenvalues()).tolist()}
    if kind != "distance_sphere":
        raise DomainError(f"unknown submanifold kind {kind!r}")
    r = float(M_spec["radius"])
    R = sphere_radius(group_id)
    if not 0 < r < np.pi * R:
        raise DomainError("radius must lie strictly between 0 and the antipodal distance")
    X = r * g.torus_basis[0]
    base = np.broadcast_to(X, (N + 1, g.n, g.n)).copy()
    frame0 = np.concatenate([np.array(basis.matrices), _horizontal_loops(g, X, N)])

    def probe_at(path: GroupPath):
        gi = g.inv(path.samples)
        point = gauge_act(path, AlgebraLoop(group_id, base, True)).samples
        frame = _orthonormal_frame(path.samples[None] @ frame0 @ gi[None], g, N)
        return point, frame

    results = []
    reference = None
    attempts = 0
    while len(results) < point_count + 1:
        attempts += 1
        if attempts > 5 * (point_count + 1):
            raise TruncationError("could not sample points away from the focal set")
        if not results:
            z = AlgebraLoop.zero(group_id, N)
        else:
            z = AlgebraLoop.random(group_id, rng, N, 2, gauge_amplitude)
        path = GroupPath.exp_of(z)
        point, frame = probe_at(path)
        # horizontal directions at the point, in frame coordinates
        horiz = path.samples[None] @ _horizontal_loops(g, X, N) @ g.inv(path.samples)[None]
        sub = np.array([[_l2(g, h, f, N) for f in frame] for h in horiz])
        info = level_set_shape_operator(group_id, point, frame, scheme=scheme, subspace=sub)
        if info["gradient_norm"] < 0.1:
            continue
        # carry the normal from the base point along tau -> exp(tau Z) . X
        sign, prev = 1.0, None
        normals = []
        for tau in np.linspace(0.0, 1.0, transport_steps + 1):
            p_tau = GroupPath.exp_of(tau * z)
            nu = _normal_loop(group_id, gauge_act(p_tau, AlgebraLoop(group_id, base, True)), scheme)
            if prev is not None and _l2(g, nu, prev, N) < 0:
                nu = -nu
            normals.append(nu)
            prev = nu
        grad_loop = np.einsum("m,m...->...", info["gradient"], frame) / info["gradient_norm"]
        orient = _l2(g, normals[-1], grad_loop, N)
        sign = 1.0 if orient >= 0 else -1.0
        vals = metric_scale * sign * info["eigenvalues"]
        if sign < 0:
            vals = vals[::-1]
        results.append({"eigenvalues": vals,
                        "horizontal": metric_scale * sign * info["subspace_eigenvalues"], "gradient_norm": info["gradient_norm"],
                        "distance_to_center": info["distance"], "normal_alignment": abs(orient),
                        "hessian_asymmetry": info["hessian_asymmetry"]})
        if reference is None:
            reference = vals
    spreads = [float(np.max(np.abs(res["eigenvalues"] - reference))) for res in results[1:]]
    predicted = metric_scale * np.cos(r / R) / (np.sin(r / R) * R)
    ref_abs = np.abs(reference)
    return {
        "kind": "distance_sphere", "radius": r, "K": K, "N": N, "metric_scale": metric_scale,
        "point_count": len(results) - 1,
        "discrepancy": max(spreads) if spreads else 0.0,
        "pairwise_discrepancies": spreads,
        "max_abs_curvature": float(np.max(ref_abs)),
        "sphere_curvature_prediction": float(predicted),
        "horizontal_curvatures": results[0]["horizontal"].tolist(),
        "sphere_curvature_error": float(max(np.max(np.abs(np.abs(res["horizontal"]) - abs(predicted)))
                                            for res in results)),
        "normal_alignment_min": float(min(res["normal_alignment"] for res in results)),
        "gradient_norm_min": float(min(res["gradient_norm"] for res in results)),
        "reference_spectrum": reference.tolist(),
    }


def _l2(group, a, b, N):
    f = group.inner(a, b)
    return float((np.sum(f) - 0.5 * (f[0] + f[-1])) / N)


def _normal_loop(group_id: str, u, scheme: str) -> np.ndarray:
    """Unit normal of the distance level set at ``u``: horizontal lift of ``log phi(u) / |log phi(u)|``."""
    g = get_group(group_id)
    x = g.log(phi(u, scheme))
    x = x / g.norm(x)
    return np.array(horizontal_lift(u, x, scheme).samples)
