"""
The parallel transport map of a Lie group.

A loop ``u`` in the algebra determines the group path solving

    g'(t) = g(t) u(t),    g(0) = e,

and ``phi(u) = g(1)``.  This left-trivialized form is the one under which the
gauge action ``(g . u) = Ad(g) u - g' g^{-1}`` satisfies
``phi(g . u) = g(0) phi(u) g(1)^{-1}``.

Three fourth-order Lie-group integrators are provided; every step multiplies
by an exponential, so the computed path stays in the group up to round-off.
The ODE is linear with a coefficient that does not depend on the state, so
the per-step increments are computed for all steps at once and only the
final product is sequential.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TruncationError
from .lie_core import GroupElement, LieGroup, get_group, root_decomposition, generic_torus_vector
from .loop_space import (AlgebraLoop, GroupPath, LoopBasis, _shift_open, _shift_periodic,
                         gauge_act)

log = logging.getLogger(__name__)

SCHEMES = ("rkmk4", "magnus4", "cf4")

_SQ3 = np.sqrt(3.0)
_GAUSS = (0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0)
_CF_A1 = 0.25 + _SQ3 / 6.0
_CF_A2 = 0.25 - _SQ3 / 6.0

# stage offsets (fractions of a step) needed by each scheme
STAGE_OFFSETS = {"rkmk4": (0.0, 0.5, 1.0), "magnus4": _GAUSS, "cf4": _GAUSS}


def _bracket(x, y):
    return x @ y - y @ x


def _dexpinv(theta, a):
    """Truncated inverse of the left-trivialized exponential derivative."""
    c = _bracket(theta, a)
    return a + 0.5 * c + _bracket(theta, c) / 12.0


def stage_values(group: LieGroup, samples: np.ndarray, closed: bool, offsets) -> list[np.ndarray]:
    """Values of a batch of loops at ``(i + c)/N`` for each offset ``c``.

    ``samples`` has shape ``(B, N + 1, n, n)``; each returned array has shape
    ``(B, N, n, n)``.
    """
    B, N1 = samples.shape[:2]
    N = N1 - 1
    coords = np.moveaxis(group.coords(samples), 1, 0)  # (N + 1, B, dim)
    out = []
    for c in offsets:
        if c == 0.0:
            vals = coords[:N]
        elif c == 1.0:
            vals = coords[1:]
        elif closed:
            vals = _shift_periodic(coords[:N], c)
        else:
            vals = _shift_open(coords, c)
        out.append(group.from_coords(np.moveaxis(vals, 0, 1)))
    return out


def step_increments(scheme: str, stages: list[np.ndarray], h: float, group: LieGroup) -> np.ndarray:
    """Per-step group factors ``E_i`` with ``g_{i+1} = g_i E_i``, shape ``(B, N, n, n)``."""
    if scheme == "rkmk4":
        a1, a2, a3 = stages
        f1 = h * a1
        f2 = h * _dexpinv(0.5 * f1, a2)
        f3 = h * _dexpinv(0.5 * f2, a2)
        f4 = h * _dexpinv(f3, a3)
        return group.exp((f1 + 2.0 * f2 + 2.0 * f3 + f4) / 6.0)
    if scheme == "magnus4":
        a1, a2 = stages
        omega = 0.5 * h * (a1 + a2) + (_SQ3 / 12.0) * h * h * _bracket(a1, a2)
        return group.exp(omega)
    if scheme == "cf4":
        a1, a2 = stages
        return group.exp(h * (_CF_A1 * a1 + _CF_A2 * a2)) @ group.exp(h * (_CF_A2 * a1 + _CF_A1 * a2))
    raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _tree_product(factors: np.ndarray) -> np.ndarray:
    """Ordered product over axis 1 by pairwise reduction."""
    p = factors
    while p.shape[1] > 1:
        if p.shape[1] % 2:
            p = np.concatenate([p[:, :-2], p[:, -2:-1] @ p[:, -1:]], axis=1)
            continue
        p = p[:, 0::2] @ p[:, 1::2]
    return p[:, 0]


def transport_batch(group_id: str, samples: np.ndarray, closed: bool = True,
                    scheme: str = "rkmk4", chunk: int = 64) -> np.ndarray:
    """Endpoints ``phi(u_b)`` for a batch of sampled loops ``(B, N + 1, n, n)``."""
    group = get_group(group_id)
    samples = np.asarray(samples)
    if samples.ndim == 3:
        samples = samples[None]
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    N = samples.shape[1] - 1
    out = np.empty((samples.shape[0], group.n, group.n), dtype=group.dtype)
    for start in range(0, samples.shape[0], chunk):
        block = samples[start:start + chunk]
        stages = stage_values(group, block, closed, STAGE_OFFSETS[scheme])
        out[start:start + chunk] = _tree_product(step_increments(scheme, stages, 1.0 / N, group))
    return out


def phi(u: AlgebraLoop, scheme: str = "rkmk4") -> np.ndarray:
    """The transport endpoint as a matrix."""
    _warn_step(u)
    return transport_batch(u.group_id, u.samples[None], u.closed, scheme)[0]


def _warn_step(u: AlgebraLoop):
    sup = float(np.max(u.group.norm(u.samples)))
    if sup / u.N > 1.0:
        log.warning("step-size sanity check: sup|u|/N = %.3g exceeds 1", sup / u.N)


@dataclass(frozen=True, eq=False)
class TransportSolution:
    input: AlgebraLoop
    path: GroupPath
    endpoint: GroupElement
    integrator_id: str
    step_count: int

    def residual(self) -> float:
        """Max interior defect of ``g' = g u`` under centered differences."""
        g = self.path.samples
        h = 1.0 / self.step_count
        d = (g[2:] - g[:-2]) / (2 * h) - g[1:-1] @ self.input.samples[1:-1]
        return float(np.max(np.linalg.norm(d, axis=(1, 2))))

    def unitarity_drift(self) -> float:
        g = self.path.samples
        grp = self.input.group
        return float(np.max(np.linalg.norm(grp.inv(g) @ g - grp.identity, axis=(1, 2))))


def solve_transport(u: AlgebraLoop, scheme: str = "rkmk4") -> TransportSolution:
    """Integrate ``g' = g u`` on the grid of ``u`` and keep every sample."""
    _warn_step(u)
    group = u.group
    stages = stage_values(group, u.samples[None], u.closed, STAGE_OFFSETS.get(scheme, ()))
    factors = step_increments(scheme, stages, 1.0 / u.N, group)[0]
    path = np.empty((u.N + 1, group.n, group.n), dtype=group.dtype)
    path[0] = group.identity
    for i in range(u.N):
        path[i + 1] = path[i] @ factors[i]
    gp = GroupPath(u.group_id, path, periodic=False)
    return TransportSolution(u, gp, GroupElement(path[-1], u.group_id), scheme, u.N)


def convergence_study(u_fn, group_id: str, grids=(128, 256, 512, 1024), scheme="rkmk4",
                      reference_grid: int = 4096) -> dict:
    """Self-convergence of a scheme against a fine-grid reference.

    ``u_fn(N)`` must return the same loop sampled on an ``N``-grid.  The fitted
    order is the negated slope of ``log(error)`` against ``log(N)``.
    """
    ref = phi(u_fn(reference_grid), scheme)
    errs = np.array([np.linalg.norm(phi(u_fn(N), scheme) - ref) for N in grids])
    slope = np.polyfit(np.log(np.asarray(grids, float)), np.log(errs), 1)[0]
    return {"grids": list(grids), "errors": errs.tolist(), "order": float(-slope), "scheme": scheme}


def check_equivariance(g: GroupPath, u: AlgebraLoop, scheme: str = "rkmk4") -> float:
    """Frobenius residual of ``phi(g . u) = g(0) phi(u) g(1)^{-1}``."""
    lhs = phi(gauge_act(g, u), scheme)
    grp = u.group
    rhs = g.samples[0] @ phi(u, scheme) @ grp.inv(g.samples[-1])
    return float(np.linalg.norm(lhs - rhs))


# ---------------------------------------------------------------------------
# differential of phi

_FD_STENCILS = {
    2: ((1.0, -1.0), (1.0, -1.0), 2.0),
    4: ((2.0, 1.0, -1.0, -2.0), (-1.0, 8.0, -8.0, 1.0), 12.0),
}


def jacobian_batch(group_id: str, points: np.ndarray, directions: np.ndarray, eps: float = 1e-3,
                   order: int = 4, scheme: str = "rkmk4", closed: bool = True,
                   chunk: int = 64) -> np.ndarray:
    """Left-trivialized difference quotients of phi, ``(P, M, dim)``.

    Entry ``[p, m]`` approximates ``d phi`` at ``points[p]`` applied to
    ``directions[m]`` (both sampled matrix arrays), translated back to the
    identity and written in orthonormal coordinates.
    """
    if order not in _FD_STENCILS:
        raise DomainError("finite-difference order must be 2 or 4")
    offsets, weights, denom = _FD_STENCILS[order]
    group = get_group(group_id)
    points = np.asarray(points)
    directions = np.asarray(directions)
    P, M = len(points), len(directions)
    base_inv = group.inv(transport_batch(group_id, points, closed, scheme))
    out = np.zeros((P, M, group.dim))
    for p in range(P):
        batch = np.concatenate([points[p][None] + s * eps * directions for s in offsets])
        ends = transport_batch(group_id, batch, closed, scheme, chunk)
        for j, w in enumerate(weights):
            logs = group.log(base_inv[p] @ ends[j * M:(j + 1) * M])
            out[p] += w * group.coords(logs)
    return out / (denom * eps)


def _jacobian(u: AlgebraLoop, directions: np.ndarray, eps: float, order: int, scheme: str) -> np.ndarray:
    return jacobian_batch(u.group_id, u.samples[None], directions, eps, order, scheme, u.closed)[0]


def differential_phi(u: AlgebraLoop, direction: AlgebraLoop, eps: float = 1e-4,
                     scheme: str = "rkmk4", order: int = 2) -> np.ndarray:
    """Central difference of ``log(phi(u)^{-1} phi(u + s d))`` at ``s = 0``.

    Returns an algebra matrix (the tangent vector left-translated to ``e``).
    ``order = 4`` uses a five-point stencil for kernel-level accuracy.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise DomainError("eps must lie in [1e-6, 1e-3]")
    u._compatible(direction)
    coords = _jacobian(u, direction.samples[None], eps, order, scheme)[0]
    return u.group.from_coords(coords)


def analytic_differential(u: AlgebraLoop, direction: AlgebraLoop, scheme: str = "rkmk4") -> np.ndarray:
    """``Ad(g(1)^{-1}) int Ad(g(t)) w(t) dt`` from the transport path (reference formula)."""
    u._compatible(direction)
    sol = solve_transport(u, scheme)
    g = sol.path.samples
    grp = u.group
    integrand = g @ direction.samples @ grp.inv(g)
    wts = np.full(u.N + 1, 1.0 / u.N)
    wts[[0, -1]] *= 0.5
    integral = np.tensordot(wts, integrand, axes=1)
    return grp.inv(g[-1]) @ integral @ g[-1]


def horizontal_lift(u: AlgebraLoop, v: np.ndarray, scheme: str = "rkmk4") -> AlgebraLoop:
    """Horizontal vector at ``u`` mapping to the left-translated ``v``: ``Ad(g(t)^{-1} g(1)) v``."""
    sol = solve_transport(u, scheme)
    g = sol.path.samples
    grp = u.group
    rel = grp.inv(g) @ g[-1]
    return AlgebraLoop(u.group_id, rel @ v @ grp.inv(rel), closed=False)


@dataclass
class SubmersionReport:
    rank: int
    dim: int
    singular_values: list
    isometry_residual: float
    kernel_projection: float | None
    frame_size: int

    def as_dict(self):
        return dict(self.__dict__)


def _whitened(frame: np.ndarray, N: int):
    """Orthonormalize frame coordinates ``(M, N+1, dim)`` under the L2 product."""
    c = frame[:, :-1, :].reshape(len(frame), -1)
    gram = c @ c.T / N
    w, q = np.linalg.eigh(gram)
    if np.min(w) <= 1e-12 * np.max(w):
        raise TruncationError("frame is linearly dependent")
    return (q / np.sqrt(w)) @ q.T, gram


def check_riemannian_submersion(u: AlgebraLoop, K: int = 8, frame: np.ndarray | None = None,
                                tangent_mask: np.ndarray | None = None, decomposition=None,
                                eps: float = 1e-3, scheme: str = "rkmk4",
                                rank_tol: float = 1e-8) -> SubmersionReport:
    """Check that d phi is an isometry on the horizontal space of a truncated frame.

    ``frame`` is an array of matrix samples ``(M, N + 1, n, n)``; by default
    the orthonormal loop basis with ``|k| <= K``.  ``tangent_mask`` marks the
    members expected to lie in the kernel; the kernel projection residual is
    the norm of the numerically determined kernel's component outside their span.
    """
    group = u.group
    if frame is None:
        if decomposition is None:
            decomposition = root_decomposition(generic_torus_vector(u.group_id, np.random.default_rng(0)),
                                               u.group_id)
        basis = LoopBasis(decomposition, K, u.N)
        frame = np.array(basis.matrices)
        tangent_mask = np.array([lab.kind != "constant" for lab in basis.labels])
    jac = _jacobian(u, frame, eps, 4, scheme)  # (M, dim)
    white, _ = _whitened(group.coords(frame), u.N)
    jq = white @ jac
    U, S, Vt = np.linalg.svd(jq, full_matrices=True)
    rank = int(np.sum(S > rank_tol * S[0]))
    if rank != group.dim:
        raise TruncationError(f"sampled differential has rank {rank}, expected {group.dim}")
    iso = float(np.max(np.abs(S[:rank] ** 2 - 1.0)))
    kernel_proj = None
    if tangent_mask is not None:
        # kernel vectors in whitened coordinates -> frame coefficients
        kern = U[:, rank:]
        coeff = white @ kern
        outside = coeff[~np.asarray(tangent_mask)]
        kernel_proj = float(np.linalg.norm(outside, ord=2)) if outside.size else 0.0
    return SubmersionReport(rank, group.dim, S.tolist(), iso, kernel_proj, len(frame))


def gauge_translated_frame(g: GroupPath, frame: np.ndarray) -> np.ndarray:
    """Linear part of the gauge action applied to each frame loop: ``Ad(g(t)) w(t)``."""
    gi = g.group.inv(g.samples)
    return g.samples[None] @ frame @ gi[None]


def translated_point(g: GroupPath) -> AlgebraLoop:
    """``g . 0``, the image of the zero loop under a gauge path."""
    return gauge_act(g, AlgebraLoop.zero(g.group_id, g.N))
