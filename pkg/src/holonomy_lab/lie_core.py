"""
Compact matrix Lie groups SU(2), SU(3) and SO(3).

Algebra elements are anti-Hermitian matrices, group elements unitary (or
special orthogonal) matrices.  The bi-invariant metric uses the negative of
the Killing form, realised through the defining representation as
``-kappa * Re tr(x y)``; ``kappa`` is checked against a brute-force Killing
form built from structure constants when a group is first constructed.

All batched methods accept arrays of shape ``(..., n, n)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BranchError, DegeneracyError, DomainError

GROUP_IDS = ("su2", "su3", "so3")

ALGEBRA_TOL = 1e-12
GROUP_TOL = 1e-10


def _gell_mann(n: int) -> list[np.ndarray]:
    """Generalised Gell-Mann matrices (Hermitian, tr(l_a l_b) = 2 delta_ab)."""
    mats = []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), complex)
            s[j, k] = s[k, j] = 1.0
            mats.append(s)
            a = np.zeros((n, n), complex)
            a[j, k] = -1j
            a[k, j] = 1j
            mats.append(a)
    for l in range(1, n):
        d = np.zeros((n, n), complex)
        d[np.arange(l), np.arange(l)] = 1.0
        d[l, l] = -l
        mats.append(d * np.sqrt(2.0 / (l * (l + 1))))
    return mats


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


class LieGroup:
    """A compact matrix group together with its Lie algebra.

    Use :func:`get_group` rather than instantiating directly; instances are
    cached and immutable.
    """

    def __init__(self, group_id: str):
        if group_id not in GROUP_IDS:
            raise DomainError(f"unknown group id {group_id!r}; expected one of {GROUP_IDS}")
        self.group_id = group_id
        if group_id == "so3":
            self.n = 3
            self.real = True
            self.kappa = 1.0  # Killing form of so(n) is (n - 2) tr(xy)
            gens = []
            for j, k in ((1, 2), (0, 2), (0, 1)):
                e = np.zeros((3, 3))
                e[j, k], e[k, j] = -1.0, 1.0
                gens.append(e)
            # torus generator (rotation in the 0-1 plane) goes last
            raw = [gens[0], gens[1], gens[2]]
            self.torus_rank = 1
        else:
            self.n = 2 if group_id == "su2" else 3
            self.real = False
            self.kappa = 2.0 * self.n  # Killing form of su(n) is 2n tr(xy)
            raw = [1j * m for m in _gell_mann(self.n)]
            self.torus_rank = self.n - 1
        self.dtype = float if self.real else complex
        basis = np.array(raw, dtype=self.dtype)
        norms = np.sqrt(self.inner(basis, basis))
        self.basis = basis / norms[:, None, None]
        self.dim = len(self.basis)
        # torus generators are the last `torus_rank` basis elements
        self.torus_basis = self.basis[self.dim - self.torus_rank:]
        self.identity = np.eye(self.n, dtype=self.dtype)
        self._check_killing_constant()

    def __repr__(self):
        return f"LieGroup({self.group_id!r})"

    # -- metric ---------------------------------------------------------
    def inner(self, x, y):
        """Ad-invariant inner product, batched over leading axes."""
        return -self.kappa * np.einsum("...ij,...ji->...", x, y).real

    def norm(self, x):
        return np.sqrt(np.maximum(self.inner(x, x), 0.0))

    def coords(self, x):
        """Coordinates of ``x`` in the orthonormal basis ``self.basis``."""
        return -self.kappa * np.einsum("...ij,aji->...a", x, self.basis).real

    def from_coords(self, c):
        return np.einsum("...a,aij->...ij", np.asarray(c, float), self.basis)

    def ad_matrix(self, x):
        """Matrix of ad(x) in the orthonormal basis: column a is [x, E_a]."""
        brackets = np.einsum("ij,ajk->aik", x, self.basis) - np.einsum("aij,jk->aik", self.basis, x)
        return self.coords(brackets).T

    def killing(self, x, y) -> float:
        """Brute-force Killing form tr(ad x ad y)."""
        return float(np.trace(self.ad_matrix(x) @ self.ad_matrix(y)))

    def _check_killing_constant(self):
        # the negative Killing form should be the identity on the basis
        gram = np.array([[self.killing(a, b) for b in self.basis] for a in self.basis])
        if not np.allclose(-gram, np.eye(self.dim), atol=1e-10):
            raise RuntimeError(f"Killing constant mismatch for {self.group_id}")

    # -- exponential and logarithm --------------------------------------
    def exp(self, x):
        x = np.asarray(x)
        if self.group_id == "su2":
            # x = s * n with n^2 = -I
            s = np.sqrt(np.abs(x[..., 0, 0]) ** 2 + np.abs(x[..., 0, 1]) ** 2)
            sinc = np.sinc(s / np.pi)
            return np.cos(s)[..., None, None] * self.identity + sinc[..., None, None] * x
        if self.group_id == "so3":
            w = np.stack([x[..., 2, 1], x[..., 0, 2], x[..., 1, 0]], axis=-1)
            s = np.linalg.norm(w, axis=-1)
            a = np.sinc(s / np.pi)
            half = np.sinc(s / (2 * np.pi))
            b = 0.5 * half * half
            return self.identity + a[..., None, None] * x + b[..., None, None] * (x @ x)
        # Pade scaling-and-squaring keeps unitarity an order of magnitude
        # tighter than an eigendecomposition for tiny step increments
        return scipy.linalg.expm(x)

    def log(self, g):
        """Principal logarithm; raises :class:`BranchError` near the cut locus."""
        g = np.asarray(g)
        if self.group_id == "su2":
            a = 0.5 * (g - np.conj(np.swapaxes(g, -1, -2)))
            s = np.sqrt(np.abs(a[..., 0, 0]) ** 2 + np.abs(a[..., 0, 1]) ** 2)
            c = 0.5 * np.trace(g, axis1=-2, axis2=-1).real
            theta = np.arctan2(s, c)
            if np.any(theta > np.pi - 1e-6):
                raise BranchError("eigenvalue -1 encountered in su(2) logarithm")
            return (theta / np.where(s > 0, np.sin(theta), 1.0) + (s == 0))[..., None, None] * a
        if self.group_id == "so3":
            a = 0.5 * (g - np.swapaxes(g, -1, -2))
            w = np.stack([a[..., 2, 1], a[..., 0, 2], a[..., 1, 0]], axis=-1)
            s = np.linalg.norm(w, axis=-1)
            c = 0.5 * (np.trace(g, axis1=-2, axis2=-1) - 1.0)
            theta = np.arctan2(s, c)
            if np.any(theta > np.pi - 1e-6):
                raise BranchError("rotation angle pi encountered in so(3) logarithm")
            return (theta / np.where(s > 0, np.sin(theta), 1.0) + (s == 0))[..., None, None] * a
        flat = g.reshape(-1, self.n, self.n)
        out = np.empty_like(flat)
        for i, m in enumerate(flat):
            t, z = scipy.linalg.schur(m, output="complex")
            ang = np.angle(np.diag(t))
            if np.any(np.abs(ang) > np.pi - 1e-6):
                raise BranchError("eigenvalue -1 encountered in logarithm")
            if abs(ang.sum()) > 1e-8:
                raise BranchError("principal logarithm leaves su(n); element outside principal branch")
            out[i] = (z * (1j * ang)[None, :]) @ z.conj().T
        return out.reshape(g.shape)

    # -- actions ----------------------------------------------------------
    def inv(self, g):
        return np.conj(np.swapaxes(g, -1, -2))

    def Ad(self, g, x):
        return g @ x @ self.inv(g)

    # -- checks -----------------------------------------------------------
    def is_algebra(self, x, tol=ALGEBRA_TOL) -> bool:
        x = np.asarray(x)
        scale = max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        ok = np.max(np.abs(x + np.conj(np.swapaxes(x, -1, -2)))) <= tol * scale
        if not self.real:
            ok = ok and np.max(np.abs(np.trace(x, axis1=-2, axis2=-1))) <= tol * scale * self.n
        return bool(ok)

    def is_group(self, g, tol=GROUP_TOL) -> bool:
        g = np.asarray(g)
        unit = np.max(np.abs(self.inv(g) @ g - self.identity)) <= tol
        det = np.max(np.abs(np.linalg.det(g) - 1.0)) <= tol
        return bool(unit and det)

    # -- random draws -------------------------------------------------------
    def random_algebra(self, rng: np.random.Generator, scale: float = 1.0, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return self.from_coords(scale * rng.standard_normal(shape + (self.dim,)))

    def random_group(self, rng: np.random.Generator, size=None):
        """Haar-ish draw: exponential of a wide Gaussian algebra element, kept off the cut locus."""
        x = self.random_algebra(rng, 1.0, size)
        # shrink so that the principal log stays well defined
        nrm = self.norm(x)
        spectral = np.max(np.abs(np.linalg.eigvals(x)), axis=-1) if np.ndim(nrm) else np.max(np.abs(np.linalg.eigvals(x)))
        factor = np.minimum(1.0, 2.5 / np.maximum(spectral, 1e-12))
        return self.exp(np.asarray(factor)[..., None, None] * x)

    def torus_vector(self, angles) -> np.ndarray:
        """Element of the diagonal (or 0-1 rotation) torus from real parameters.

        For su(n) ``angles`` holds n diagonal phases (projected to trace zero);
        for so(3) a single rotation rate.
        """
        angles = np.atleast_1d(np.asarray(angles, float))
        if self.group_id == "so3":
            x = np.zeros((3, 3))
            x[0, 1], x[1, 0] = -angles[0], angles[0]
            return x
        if len(angles) != self.n:
            raise DomainError(f"{self.group_id} torus vector needs {self.n} phases")
        return np.diag(1j * (angles - angles.mean()))


@functools.lru_cache(maxsize=None)
def get_group(group_id: str) -> LieGroup:
    return LieGroup(group_id)


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    matrix: np.ndarray
    group_id: str

    def __post_init__(self):
        g = get_group(self.group_id)
        m = np.array(self.matrix, dtype=g.dtype)
        if m.shape != (g.n, g.n) or not g.is_algebra(m):
            raise DomainError(f"matrix is not an element of {self.group_id}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def group(self) -> LieGroup:
        return get_group(self.group_id)

    def __add__(self, other):
        _same_group(self, other)
        return AlgebraVector(self.matrix + other.matrix, self.group_id)

    def __neg__(self):
        return AlgebraVector(-self.matrix, self.group_id)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return AlgebraVector(float(s) * self.matrix, self.group_id)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class GroupElement:
    matrix: np.ndarray
    group_id: str

    def __post_init__(self):
        g = get_group(self.group_id)
        m = np.array(self.matrix, dtype=g.dtype)
        if m.shape != (g.n, g.n) or not g.is_group(m):
            raise DomainError(f"matrix is not an element of {self.group_id.upper()}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def group(self) -> LieGroup:
        return get_group(self.group_id)

    def __matmul__(self, other):
        _same_group(self, other)
        return GroupElement(self.matrix @ other.matrix, self.group_id)

    def inverse(self):
        return GroupElement(self.group.inv(self.matrix), self.group_id)


def _same_group(a, b):
    if a.group_id != b.group_id:
        raise DomainError(f"group mismatch: {a.group_id} vs {b.group_id}")


def inner(x: AlgebraVector, y: AlgebraVector) -> float:
    _same_group(x, y)
    return float(x.group.inner(x.matrix, y.matrix))


def killing_inner(x: AlgebraVector, y: AlgebraVector) -> float:
    """Negative Killing form via structure constants; agrees with :func:`inner`."""
    _same_group(x, y)
    return -x.group.killing(x.matrix, y.matrix)


def exp_group(x: AlgebraVector) -> GroupElement:
    return GroupElement(x.group.exp(x.matrix), x.group_id)


def log_group(g: GroupElement) -> AlgebraVector:
    grp = g.group
    out = grp.log(g.matrix)
    if grp.real:
        out = out.real
    return AlgebraVector(out, g.group_id)


def Ad(g: GroupElement, x: AlgebraVector) -> AlgebraVector:
    _same_group(g, x)
    return AlgebraVector(g.group.Ad(g.matrix, x.matrix), x.group_id)


# ---------------------------------------------------------------------------
# root space decomposition


@dataclass(frozen=True, eq=False)
class RootDatum:
    alpha_value: float
    e: np.ndarray
    e_k: np.ndarray
    multiplicity_index: int = 1


@dataclass(frozen=True, eq=False)
class TorusDecomposition:
    group_id: str
    v: np.ndarray
    torus_basis: np.ndarray
    roots: tuple
    zero_space_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0)))

    @property
    def group(self) -> LieGroup:
        return get_group(self.group_id)

    def ordered_basis(self) -> np.ndarray:
        """Orthonormal basis of g: torus, then (e, e_k) per root, then zero space."""
        g = self.group
        parts = [self.torus_basis]
        for r in self.roots:
            parts.append(np.stack([r.e, r.e_k]))
        if len(self.zero_space_basis):
            parts.append(self.zero_space_basis)
        return np.concatenate(parts).astype(g.dtype)

    def flat_basis(self) -> np.ndarray:
        """Orthonormal basis of the torus plus zero space (the e^0 directions)."""
        if len(self.zero_space_basis):
            return np.concatenate([self.torus_basis, self.zero_space_basis])
        return self.torus_basis


def in_torus(group: LieGroup, v: np.ndarray, tol: float = 1e-10) -> bool:
    c = group.coords(v)
    t = group.coords(group.torus_basis)
    resid = c - t.T @ (t @ c)
    return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(c)))


def root_decomposition(v, group_id: str | None = None, tol: float = 1e-9) -> TorusDecomposition:
    """Split g into the torus and (e, e_k) root pairs relative to a torus vector.

    ``v`` may be an :class:`AlgebraVector` or a raw matrix (then ``group_id``
    is required).  Roots come back sorted by ``alpha_value`` descending with
    ``ad(v) e = alpha e_k`` and ``ad(v) e_k = -alpha e``.
    """
    if isinstance(v, AlgebraVector):
        group_id, v = v.group_id, v.matrix
    if group_id is None:
        raise DomainError("group_id required for a raw matrix")
    g = get_group(group_id)
    v = np.asarray(v, dtype=g.dtype)
    if not in_torus(g, v):
        raise DomainError("root_decomposition needs a vector in the maximal torus")
    ad = g.ad_matrix(v)
    ad2 = ad @ ad
    ad2 = 0.5 * (ad2 + ad2.T)
    w, q = np.linalg.eigh(ad2)
    scale = max(1.0, float(np.max(np.abs(w))))
    zero = np.abs(w) <= tol * scale
    if zero.sum() != g.torus_rank:
        raise DegeneracyError(
            "torus vector is singular (a root vanishes); perturb v to a generic position"
        )
    # cluster the negative eigenvalues -alpha^2
    nz = np.where(~zero)[0]
    clusters: list[list[int]] = []
    for idx in nz:
        if clusters and abs(w[idx] - w[clusters[-1][0]]) <= tol * scale:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    roots = []
    for cl in clusters:
        if len(cl) != 2:
            raise DegeneracyError(
                "coinciding root values at this torus vector; perturb v to a generic position"
            )
        alpha = float(np.sqrt(-np.mean(w[cl])))
        sub = q[:, cl]
        # deterministic representative: project the first basis direction with support
        proj = sub @ sub.T
        j = int(np.argmax(np.linalg.norm(proj, axis=0) > 0.5))
        e = proj[:, j] / np.linalg.norm(proj[:, j])
        if e[np.argmax(np.abs(e))] < 0:
            e = -e
        e_k = ad @ e / alpha
        roots.append(RootDatum(alpha, g.from_coords(e), g.from_coords(e_k), 1))

    def key(r):
        return (-round(r.alpha_value, 9), tuple(np.round(g.coords(r.e), 12)))

    roots.sort(key=key)
    return TorusDecomposition(group_id, v, g.torus_basis.copy(), tuple(roots),
                              np.zeros((0, g.n, g.n), dtype=g.dtype))


def generic_torus_vector(group_id: str, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """A random torus vector whose root values are distinct and nonzero."""
    g = get_group(group_id)
    for _ in range(100):
        angles = scale * rng.uniform(-1.0, 1.0, size=1 if g.group_id == "so3" else g.n)
        v = g.torus_vector(angles)
        try:
            d = root_decomposition(v, group_id)
        except DegeneracyError:
            continue
        alphas = [r.alpha_value for r in d.roots]
        if min(alphas) > 0.05 * scale and (len(alphas) < 2 or min(np.diff(sorted(alphas))) > 0.05 * scale):
            return v
    raise DegeneracyError("failed to draw a generic torus vector")
