"""
Loops in a Lie algebra, paths in the group, and the path-group gauge action.

An :class:`AlgebraLoop` stores ``N + 1`` samples at ``t_i = i / N`` (both
endpoints), so open paths and closed loops share one storage layout.  Closed
loops are treated as periodic: quadrature is the rectangle rule (exact for
trigonometric polynomials of degree below ``N``) and off-grid values come from
trigonometric interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.interpolate

from .errors import DomainError
from .lie_core import TorusDecomposition, get_group
from .serialization import matrix_from_json, matrix_to_json

KINDS = ("constant", "l1", "l2")


def _check_grid(N: int):
    if N < 4 or N & (N - 1):
        raise DomainError(f"grid size must be a power of two >= 4, got {N}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def _shift_periodic(values: np.ndarray, c: float) -> np.ndarray:
    """Resample periodic data ``values[i] = f(i/N)`` at ``(i + c)/N``.

    ``values`` has the grid on axis 0 and is real; the Nyquist term is kept
    real by using its cosine part only.
    """
    N = values.shape[0]
    F = np.fft.fft(values, axis=0)
    k = np.fft.fftfreq(N, 1.0 / N)
    phase = np.exp(2j * np.pi * k * c / N)
    phase[N // 2] = np.cos(np.pi * c)
    F *= phase.reshape((N,) + (1,) * (values.ndim - 1))
    return np.fft.ifft(F, axis=0).real


def _lagrange_weights(nodes: np.ndarray, x: float) -> np.ndarray:
    w = np.ones(len(nodes))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                w[j] *= (x - xm) / (xj - xm)
    return w


def _shift_open(values: np.ndarray, c: float) -> np.ndarray:
    """Cubic Lagrange resampling of ``N + 1`` samples at ``(i + c)/N``, i < N."""
    N = values.shape[0] - 1
    out = np.empty((N,) + values.shape[1:], dtype=values.dtype)
    if N < 3:
        raise DomainError("open resampling needs at least 4 samples")
    # interior stencil i-1 .. i+2
    w = _lagrange_weights(np.array([-1.0, 0.0, 1.0, 2.0]), c)
    if N > 2:
        out[1:N - 1] = (w[0] * values[0:N - 2] + w[1] * values[1:N - 1]
                        + w[2] * values[2:N] + w[3] * values[3:N + 1])
    w0 = _lagrange_weights(np.array([0.0, 1.0, 2.0, 3.0]), c)
    out[0] = np.tensordot(w0, values[0:4], axes=1)
    wl = _lagrange_weights(np.array([-2.0, -1.0, 0.0, 1.0]), c)
    out[N - 1] = np.tensordot(wl, values[N - 3:N + 1], axes=1)
    return out


def _fd_derivative(values: np.ndarray) -> np.ndarray:
    """Fourth-order finite-difference derivative of ``N + 1`` samples on [0, 1]."""
    N = values.shape[0] - 1
    h = 1.0 / N
    d = np.empty_like(values)
    d[2:N - 1] = (values[0:N - 3] - 8 * values[1:N - 2] + 8 * values[3:N] - values[4:N + 1]) / (12 * h)
    one_sided = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    second = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
    d[0] = np.tensordot(one_sided, values[0:5], axes=1)
    d[1] = np.tensordot(second, values[0:5], axes=1)
    d[N] = -np.tensordot(one_sided, values[N:N - 5:-1], axes=1)
    d[N - 1] = -np.tensordot(second, values[N:N - 5:-1], axes=1)
    return d


def _spectral_derivative(values: np.ndarray) -> np.ndarray:
    """Derivative of periodic samples (``N + 1`` with duplicated endpoint)."""
    N = values.shape[0] - 1
    F = np.fft.fft(values[:N], axis=0)
    k = np.fft.fftfreq(N, 1.0 / N)
    k[N // 2] = 0.0
    F *= (2j * np.pi * k).reshape((N,) + (1,) * (values.ndim - 1))
    d = np.fft.ifft(F, axis=0)
    if not np.iscomplexobj(values):
        d = d.real
    return np.concatenate([d, d[:1]])


class AlgebraLoop:
    """A g-valued function on [0, 1] sampled on a uniform grid.

    Parameters
    ----------
    group_id : str
    samples : array (N + 1, n, n)
        Values at ``t_i = i / N``.
    closed : bool
        Whether the loop is periodic; then ``samples[0]`` must equal ``samples[N]``.
    fourier : dict, optional
        Map from mode ``k`` to complex coordinate vectors in the orthonormal
        basis of the group; validated against the DFT of the samples.
    """

    def __init__(self, group_id: str, samples, closed: bool = True, fourier: dict | None = None):
        g = get_group(group_id)
        samples = np.asarray(samples, dtype=g.dtype)
        if samples.ndim != 3 or samples.shape[1:] != (g.n, g.n):
            raise DomainError(f"samples must have shape (N+1, {g.n}, {g.n})")
        _check_grid(samples.shape[0] - 1)
        if not g.is_algebra(samples, tol=1e-10):
            raise DomainError(f"samples are not in {group_id}")
        if closed and np.max(np.abs(samples[0] - samples[-1])) > 1e-10 * max(1.0, np.max(np.abs(samples))):
            raise DomainError("closed loop must satisfy u(0) = u(1)")
        self.group_id = group_id
        self.samples = _frozen(samples)
        self.closed = bool(closed)
        self.fourier = None
        if fourier is not None:
            if not closed:
                raise DomainError("Fourier data is only meaningful for closed loops")
            dft = self.fourier_coefficients()
            N = self.N
            for k, coef in fourier.items():
                if abs(k) >= N // 2:
                    raise DomainError(f"mode {k} beyond the grid Nyquist limit")
                if np.max(np.abs(dft[k % N] - np.asarray(coef))) > 1e-10:
                    raise DomainError(f"Fourier coefficient for mode {k} disagrees with the samples")
            self.fourier = {int(k): _frozen(np.asarray(v, complex)) for k, v in fourier.items()}

    # -- construction -------------------------------------------------------
    @classmethod
    def from_coords(cls, group_id, coords, closed=True):
        g = get_group(group_id)
        return cls(group_id, g.from_coords(coords), closed)

    @classmethod
    def from_function(cls, group_id, f, N=1024, closed=True):
        """Sample ``f(t) -> (len(t), n, n)`` on the grid."""
        return cls(group_id, f(np.arange(N + 1) / N), closed)

    @classmethod
    def constant(cls, v, N=1024, group_id=None):
        if hasattr(v, "matrix"):
            group_id, v = v.group_id, v.matrix
        return cls(group_id, np.broadcast_to(v, (N + 1,) + np.shape(v)), True)

    @classmethod
    def zero(cls, group_id, N=1024):
        g = get_group(group_id)
        return cls(group_id, np.zeros((N + 1, g.n, g.n), g.dtype), True)

    @classmethod
    def from_modes(cls, group_id, cos_coeffs, sin_coeffs, N=1024):
        """Real trigonometric polynomial in orthonormal coordinates.

        ``u(t) = sum_k cos_coeffs[k] cos(2 pi k t) + sum_k sin_coeffs[k - 1] sin(2 pi k t)``
        with ``cos_coeffs`` of shape ``(K + 1, dim)`` and ``sin_coeffs`` of shape ``(K, dim)``.
        The Fourier map of the result is filled in.
        """
        a = np.atleast_2d(np.asarray(cos_coeffs, float))
        b = np.atleast_2d(np.asarray(sin_coeffs, float)).reshape(-1, a.shape[1])
        K = max(len(a) - 1, len(b))
        if K >= N // 2:
            raise DomainError("band limit must stay below the Nyquist mode")
        t = np.arange(N + 1) / N
        coords = np.zeros((N + 1, a.shape[1]))
        fourier = {0: a[0].astype(complex)} if len(a) else {}
        for k in range(1, K + 1):
            ak = a[k] if k < len(a) else np.zeros(a.shape[1])
            bk = b[k - 1] if k - 1 < len(b) else np.zeros(a.shape[1])
            coords += np.outer(np.cos(2 * np.pi * k * t), ak) + np.outer(np.sin(2 * np.pi * k * t), bk)
            fourier[k] = 0.5 * (ak - 1j * bk)
            fourier[-k] = 0.5 * (ak + 1j * bk)
        if len(a):
            coords += a[0]
        coords[-1] = coords[0]
        g = get_group(group_id)
        return cls(group_id, g.from_coords(coords), True, fourier)

    @classmethod
    def random(cls, group_id, rng: np.random.Generator, N=1024, K=4, amplitude=1.0, decay=1.0):
        """Seeded band-limited loop with mode amplitudes ``amplitude / (1 + k)^decay``."""
        g = get_group(group_id)
        scale = amplitude / (1.0 + np.arange(K + 1)) ** decay
        a = rng.standard_normal((K + 1, g.dim)) * scale[:, None]
        b = rng.standard_normal((K, g.dim)) * scale[1:, None]
        return cls.from_modes(group_id, a, b, N)

    # -- basic properties ---------------------------------------------------
    @property
    def group(self):
        return get_group(self.group_id)

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def coords(self) -> np.ndarray:
        return self.group.coords(self.samples)

    def _compatible(self, other):
        if not isinstance(other, AlgebraLoop):
            raise DomainError("expected an AlgebraLoop")
        if other.group_id != self.group_id:
            raise DomainError(f"group mismatch: {self.group_id} vs {other.group_id}")
        if other.N != self.N:
            raise DomainError(f"grid mismatch: {self.N} vs {other.N}")

    def __add__(self, other):
        self._compatible(other)
        return AlgebraLoop(self.group_id, self.samples + other.samples, self.closed and other.closed)

    def __sub__(self, other):
        self._compatible(other)
        return AlgebraLoop(self.group_id, self.samples - other.samples, self.closed and other.closed)

    def __neg__(self):
        return AlgebraLoop(self.group_id, -self.samples, self.closed)

    def __mul__(self, s):
        return AlgebraLoop(self.group_id, float(s) * self.samples, self.closed)

    __rmul__ = __mul__

    def is_based(self, tol=1e-10) -> bool:
        """Endpoint-zero predicate ``u(0) = u(1) = 0``."""
        return bool(np.max(np.abs(self.samples[[0, -1]])) <= tol)

    # -- spectral data ------------------------------------------------------
    def fourier_coefficients(self) -> np.ndarray:
        """DFT of the orthonormal coordinates, ``(N, dim)`` in numpy frequency order."""
        if not self.closed:
            raise DomainError("Fourier coefficients need a closed loop")
        return np.fft.fft(self.coords()[: self.N], axis=0) / self.N

    def mode_norms(self) -> np.ndarray:
        """Norm of the coefficient of each mode ``k = 0 .. N/2`` (both signs combined)."""
        F = self.fourier_coefficients()
        N = self.N
        p = np.sum(np.abs(F) ** 2, axis=1)
        out = np.empty(N // 2 + 1)
        out[0] = p[0]
        out[1:N // 2] = p[1:N // 2] + p[N - 1:N // 2:-1]
        out[N // 2] = p[N // 2]
        return np.sqrt(out)

    def shifted_samples(self, c: float) -> np.ndarray:
        """Values at ``(i + c) / N`` for ``i = 0 .. N - 1`` as matrices."""
        if c == 0.0:
            return np.array(self.samples[:-1])
        if self.closed:
            vals = _shift_periodic(self.coords()[: self.N], c)
        else:
            vals = _shift_open(self.coords(), c)
        return self.group.from_coords(vals)

    def restrict(self, start: int, stop: int) -> "AlgebraLoop":
        """Open sub-path on grid indices ``start..stop`` reparametrized to [0, 1]."""
        sub = self.samples[start:stop + 1] * ((stop - start) / self.N)
        return AlgebraLoop(self.group_id, sub, closed=False)

    def resample(self, M: int) -> "AlgebraLoop":
        """The same loop on an ``M``-grid: trigonometric interpolation when
        closed, cubic spline otherwise."""
        _check_grid(M)
        if M == self.N:
            return self
        c = self.coords()
        if self.closed:
            spec = np.fft.rfft(c[:-1], axis=0)
            n_keep = min(self.N, M) // 2
            out = np.zeros((M // 2 + 1, c.shape[1]), dtype=complex)
            out[:n_keep] = spec[:n_keep]
            # split the Nyquist term of the coarser grid symmetrically
            nyq = spec[n_keep] if n_keep < len(spec) else 0.0
            out[n_keep] = nyq * (0.5 if M > self.N else 1.0)
            new = np.fft.irfft(out, n=M, axis=0) * (M / self.N)
            new = np.concatenate([new, new[:1]])
        else:
            new = scipy.interpolate.CubicSpline(self.times, c, axis=0)(np.arange(M + 1) / M)
        return AlgebraLoop.from_coords(self.group_id, new, self.closed)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {"group_id": self.group_id, "N": self.N, "closed": self.closed,
                "samples": [matrix_to_json(m) for m in self.samples]}

    @classmethod
    def from_json(cls, data: dict) -> "AlgebraLoop":
        g = get_group(data["group_id"])
        samples = np.array([matrix_from_json(m) for m in data["samples"]])
        if g.real:
            samples = samples.real
        loop = cls(data["group_id"], samples, bool(data.get("closed", True)))
        if loop.N != int(data.get("N", loop.N)):
            raise DomainError("declared N does not match the sample count")
        return loop


def l2_inner(u: AlgebraLoop, w: AlgebraLoop) -> float:
    """L2 inner product on [0, 1] by the trapezoid rule (rectangle rule when closed)."""
    u._compatible(w)
    f = u.group.inner(u.samples, w.samples)
    return float((np.sum(f) - 0.5 * (f[0] + f[-1])) / u.N)


def hs_inner(u: AlgebraLoop, w: AlgebraLoop, s: int) -> float:
    """Spectral Sobolev product with multiplier ``(1 + (2 pi k)^2)^s``."""
    u._compatible(w)
    if not (u.closed and w.closed):
        raise DomainError("hs_inner needs closed loops")
    if s < 0 or int(s) != s:
        raise DomainError("Sobolev index must be a non-negative integer")
    N = u.N
    k = np.abs(np.fft.fftfreq(N, 1.0 / N))
    weight = (1.0 + (2 * np.pi * k) ** 2) ** int(s)
    pair = np.sum(u.fourier_coefficients() * np.conj(w.fourier_coefficients()), axis=1).real
    return float(np.sum(weight * pair))


# ---------------------------------------------------------------------------
# orthonormal loop basis


@dataclass(frozen=True)
class BasisLabel:
    """One loop of the orthonormal basis built from a torus decomposition.

    ``kind`` is ``"constant"`` (``index`` into the ordered algebra basis),
    or ``"l1"``/``"l2"`` with ``space`` either ``"root"`` (``index`` of the
    root pair, ``k`` any nonzero integer) or ``"flat"`` (``index`` into the
    torus/zero-space basis, ``k`` positive).
    """

    kind: str
    index: int
    k: int = 0
    space: str = "basis"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown basis kind {self.kind!r}")
        if self.kind == "constant":
            if self.k != 0:
                raise DomainError("constant loops carry no mode")
            return
        if self.k == 0:
            raise DomainError("mode k = 0 is reserved for constant loops")
        if self.space not in ("root", "flat"):
            raise DomainError("l-loop space must be 'root' or 'flat'")
        if self.space == "flat" and self.k < 0:
            raise DomainError("flat-space loops use positive modes only")

    def __str__(self):
        if self.kind == "constant":
            return f"const[{self.index}]"
        return f"{self.kind}.{self.space}[{self.index}].k={self.k}"


def basis_loop_samples(label: BasisLabel, decomposition: TorusDecomposition, t: np.ndarray) -> np.ndarray:
    """Matrix values of a basis loop at times ``t``."""
    if label.kind == "constant":
        basis = decomposition.ordered_basis()
        if not 0 <= label.index < len(basis):
            raise DomainError("constant index out of range")
        return np.broadcast_to(basis[label.index], (len(t),) + basis.shape[1:]).copy()
    arg = 2 * np.pi * label.k * t
    if label.space == "root":
        if not 0 <= label.index < len(decomposition.roots):
            raise DomainError("root index out of range")
        r = decomposition.roots[label.index]
        if label.kind == "l1":
            return np.cos(arg)[:, None, None] * r.e - np.sin(arg)[:, None, None] * r.e_k
        return np.sin(arg)[:, None, None] * r.e + np.cos(arg)[:, None, None] * r.e_k
    flat = decomposition.flat_basis()
    if not 0 <= label.index < len(flat):
        raise DomainError("flat index out of range")
    # sqrt(2) makes the single-frequency loop unit length
    wave = np.cos(arg) if label.kind == "l1" else np.sin(arg)
    return np.sqrt(2.0) * wave[:, None, None] * flat[label.index]


def basis_loop(label: BasisLabel, decomposition: TorusDecomposition, N: int = 1024) -> AlgebraLoop:
    """Sample one loop of the orthonormal basis on an ``N``-grid."""
    _check_grid(N)
    t = np.arange(N + 1) / N
    return AlgebraLoop(decomposition.group_id, basis_loop_samples(label, decomposition, t), True)


def basis_labels(decomposition: TorusDecomposition, K: int) -> list[BasisLabel]:
    """Canonical ordering: constants, flat loops by k, root loops by k in +-1..+-K."""
    labels = [BasisLabel("constant", i) for i in range(decomposition.group.dim)]
    labels += tertiary_labels(decomposition, K)
    return labels


def tertiary_labels(decomposition: TorusDecomposition, K: int) -> list[BasisLabel]:
    """The non-constant labels, which span the kernel of the transport differential at 0."""
    labels = []
    nflat = len(decomposition.flat_basis())
    for k in range(1, K + 1):
        for j in range(nflat):
            labels += [BasisLabel("l1", j, k, "flat"), BasisLabel("l2", j, k, "flat")]
    for k in [m for q in range(1, K + 1) for m in (q, -q)]:
        for j in range(len(decomposition.roots)):
            labels += [BasisLabel("l1", j, k, "root"), BasisLabel("l2", j, k, "root")]
    return labels


class LoopBasis:
    """Orthonormal truncated loop basis as a dense coordinate tensor.

    ``coords`` has shape ``(M, N + 1, dim)`` with ``M = dim * (2K + 1)``.
    """

    def __init__(self, decomposition: TorusDecomposition, K: int = 8, N: int = 1024):
        _check_grid(N)
        if K < 0 or 2 * K >= N:
            raise DomainError("need 0 <= 2K < N")
        self.decomposition = decomposition
        self.K, self.N = K, N
        self.labels = basis_labels(decomposition, K)
        g = decomposition.group
        t = np.arange(N + 1) / N
        mats = np.stack([basis_loop_samples(lab, decomposition, t) for lab in self.labels])
        self.matrices = _frozen(mats)
        self.coords = _frozen(g.coords(mats))

    @property
    def group_id(self):
        return self.decomposition.group_id

    def __len__(self):
        return len(self.labels)

    def loop(self, i: int) -> AlgebraLoop:
        return AlgebraLoop(self.group_id, self.matrices[i], True)

    def gram(self) -> np.ndarray:
        c = self.coords[:, :-1, :].reshape(len(self), -1)
        return c @ c.T / self.N

    def constant_indices(self) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if lab.kind == "constant"])

    def tangent_indices(self) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if lab.kind != "constant"])


# ---------------------------------------------------------------------------
# group paths and the gauge action


class GroupPath:
    """An H1 path in the group sampled at ``t_i = i / N`` (``N + 1`` samples).

    ``periodic`` marks smooth loops (``g(0) = g(1)`` with matching
    derivatives); their derivative is computed spectrally, otherwise by a
    fourth-order finite-difference stencil.
    """

    def __init__(self, group_id: str, samples, periodic: bool = False, h1_bound: float = 1e3):
        g = get_group(group_id)
        samples = np.asarray(samples, dtype=g.dtype)
        if samples.ndim != 3 or samples.shape[1:] != (g.n, g.n):
            raise DomainError(f"samples must have shape (N+1, {g.n}, {g.n})")
        _check_grid(samples.shape[0] - 1)
        if not g.is_group(samples):
            raise DomainError(f"samples are not in {group_id.upper()}")
        N = samples.shape[0] - 1
        jumps = np.linalg.norm(np.diff(samples, axis=0), axis=(1, 2))
        if np.max(jumps) > h1_bound / N:
            raise DomainError("consecutive samples jump more than the H1 sanity bound allows")
        if periodic and np.max(np.abs(samples[0] - samples[-1])) > 1e-10:
            raise DomainError("periodic path must satisfy g(0) = g(1)")
        self.group_id = group_id
        self.samples = _frozen(samples)
        self.periodic = bool(periodic)

    @property
    def group(self):
        return get_group(self.group_id)

    @property
    def N(self) -> int:
        return self.samples.shape[0] - 1

    @classmethod
    def identity(cls, group_id, N=1024):
        g = get_group(group_id)
        return cls(group_id, np.broadcast_to(g.identity, (N + 1, g.n, g.n)), True)

    @classmethod
    def constant(cls, g0, N=1024, group_id=None):
        if hasattr(g0, "matrix"):
            group_id, g0 = g0.group_id, g0.matrix
        return cls(group_id, np.broadcast_to(g0, (N + 1,) + np.shape(g0)), True)

    @classmethod
    def exp_of(cls, z: AlgebraLoop) -> "GroupPath":
        """Pointwise exponential of an algebra loop."""
        return cls(z.group_id, z.group.exp(z.samples), z.closed)

    @classmethod
    def random(cls, group_id, rng: np.random.Generator, N=1024, K=3, amplitude=1.0,
               kind: str = "loop") -> "GroupPath":
        """Seeded band-limited path ``exp(Z(t))``.

        ``kind`` is ``"loop"`` (periodic), ``"based"`` (periodic with
        ``g(0) = g(1) = e``) or ``"open"`` (adds a linear drift so that the
        endpoints and derivatives differ).
        """
        z = AlgebraLoop.random(group_id, rng, N, K, amplitude)
        g = get_group(group_id)
        if kind == "loop":
            return cls.exp_of(z)
        if kind == "based":
            return cls.exp_of(z - AlgebraLoop.constant(z.samples[0], N, group_id))
        if kind == "open":
            drift = g.random_algebra(rng, amplitude)
            t = np.arange(N + 1) / N
            return cls(group_id, g.exp(z.samples + t[:, None, None] * drift), False)
        raise DomainError(f"unknown path kind {kind!r}")

    def derivative(self) -> np.ndarray:
        if self.periodic:
            return _spectral_derivative(self.samples)
        return _fd_derivative(self.samples)

    def inverse(self) -> "GroupPath":
        return GroupPath(self.group_id, self.group.inv(self.samples), self.periodic)

    def __matmul__(self, other: "GroupPath") -> "GroupPath":
        if other.group_id != self.group_id or other.N != self.N:
            raise DomainError("paths must share group and grid")
        return GroupPath(self.group_id, self.samples @ other.samples, self.periodic and other.periodic)


def gauge_act(g: GroupPath, u: AlgebraLoop) -> AlgebraLoop:
    """``(g . u)(t) = Ad(g(t)) u(t) - g'(t) g(t)^{-1}``."""
    if g.group_id != u.group_id:
        raise DomainError(f"group mismatch: {g.group_id} vs {u.group_id}")
    if g.N != u.N:
        raise DomainError(f"grid mismatch: {g.N} vs {u.N}")
    grp = u.group
    ginv = grp.inv(g.samples)
    out = g.samples @ u.samples @ ginv - g.derivative() @ ginv
    # project away round-off so the result is exactly in the algebra
    out = 0.5 * (out - grp.inv(out))
    if not grp.real:
        out -= (np.trace(out, axis1=1, axis2=2) / grp.n)[:, None, None] * grp.identity
    closed = u.closed and g.periodic
    if closed:
        out[-1] = out[0]
    return AlgebraLoop(u.group_id, out, closed)
