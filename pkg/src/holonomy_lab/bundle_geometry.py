"""
Trivial principal bundles ``B x G`` over a flat 2-torus or a round 2-sphere.

In the trivialization a connection is a g-valued 1-form ``A`` on ``B`` and
acts on the bundle as ``omega = Ad(g^{-1}) A + g^{-1} dg``.  Along a base loop
``c`` the horizontal lift through ``(c(0), e)`` is ``(c(t), h(t))`` with
``h' = -A(c') h``.  Pulling a second connection back along this lift gives the
algebra loop

    mu_c(omega)(t) = Ad(h(t)^{-1}) (A - A_0)(c'(t)),

and the holonomy map is ``hol_c(omega) = k(1)^{-1} h(1)`` where ``k`` is the
lift for ``omega``; it agrees with the transport map applied to ``mu_c``.
Gauge transformations ``gamma : B -> G`` act by
``A -> Ad(gamma) A - d gamma gamma^{-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConstantSpeedError, DomainError
from .lie_core import get_group
from .loop_space import AlgebraLoop, GroupPath, gauge_act, l2_inner
from .transport import phi

# ---------------------------------------------------------------------------
# base manifolds


class BaseManifold:
    kind = "base"

    def metric(self, x: np.ndarray) -> np.ndarray:
        """Metric matrices ``(T, 2, 2)`` at chart points ``(T, 2)``."""
        raise NotImplementedError


@dataclass(frozen=True)
class FlatTorus(BaseManifold):
    """``R^2 / (L1 Z x L2 Z)`` with the Euclidean metric."""

    L1: float = 1.0
    L2: float = 1.0
    kind = "flat_torus_2d"

    def __post_init__(self):
        if self.L1 <= 0 or self.L2 <= 0:
            raise DomainError("torus periods must be positive")

    def metric(self, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()


@dataclass(frozen=True)
class RoundSphere(BaseManifold):
    """Sphere of radius ``R`` with stereographic charts from either pole.

    Chart ``"north"`` projects from the north pole, ``"south"`` from the south
    pole; the transition between them is ``x -> x / |x|^2``.
    """

    R: float = 1.0
    kind = "round_sphere"

    def __post_init__(self):
        if self.R <= 0:
            raise DomainError("sphere radius must be positive")

    def metric(self, x):
        x = np.atleast_2d(x)
        f = 4 * self.R ** 2 / (1 + np.sum(x * x, axis=1)) ** 2
        return f[:, None, None] * np.eye(2)

    def embed(self, x, chart="north"):
        """Ambient points ``(T, 3)`` and Jacobians ``(T, 3, 2)``."""
        x = np.atleast_2d(x)
        q = np.sum(x * x, axis=1)
        s = 1.0 / (1.0 + q)
        sign = 1.0 if chart == "north" else -1.0
        y = self.R * np.stack([2 * x[:, 0] * s, 2 * x[:, 1] * s, sign * (q - 1) * s], axis=1)
        jac = np.empty((len(x), 3, 2))
        for mu in range(2):
            dq = 2 * x[:, mu]
            ds = -dq * s * s
            for i in range(2):
                jac[:, i, mu] = 2 * self.R * ((i == mu) * s + x[:, i] * ds)
            jac[:, 2, mu] = sign * self.R * (dq * s + (q - 1) * ds)
        return y, jac

    @staticmethod
    def transition(x):
        """Chart change (self-inverse) between the two stereographic charts."""
        x = np.atleast_2d(x)
        return x / np.sum(x * x, axis=1)[:, None]

    @staticmethod
    def transition_jacobian(x):
        x = np.atleast_2d(x)
        q = np.sum(x * x, axis=1)
        return (np.eye(2)[None] / q[:, None, None]
                - 2 * np.einsum("ti,tj->tij", x, x) / (q * q)[:, None, None])


# ---------------------------------------------------------------------------
# scalar fields on the base (used for gauge transformations)


class AlgebraField:
    """A g-valued function on the base with its differential."""

    def __init__(self, group_id: str):
        self.group_id = group_id

    @property
    def group(self):
        return get_group(self.group_id)

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def differential(self, x, v) -> np.ndarray:
        raise NotImplementedError


class TorusFourierField(AlgebraField):
    """``Z(x) = sum_m C_m cos(2 pi m.x/L) + S_m sin(2 pi m.x/L)`` in orthonormal coordinates."""

    def __init__(self, group_id, base: FlatTorus, modes, cos_coeffs, sin_coeffs):
        super().__init__(group_id)
        self.base = base
        self.modes = np.asarray(modes, float).reshape(-1, 2)
        self.cos = np.asarray(cos_coeffs, float).reshape(len(self.modes), -1)
        self.sin = np.asarray(sin_coeffs, float).reshape(len(self.modes), -1)
        self.freq = 2 * np.pi * self.modes / np.array([base.L1, base.L2])

    def _phase(self, x):
        return np.atleast_2d(x) @ self.freq.T  # (T, modes)

    def value(self, x):
        ph = self._phase(x)
        return self.group.from_coords(np.cos(ph) @ self.cos + np.sin(ph) @ self.sin)

    def differential(self, x, v):
        ph = self._phase(x)
        rate = np.atleast_2d(v) @ self.freq.T
        return self.group.from_coords((-np.sin(ph) * rate) @ self.cos + (np.cos(ph) * rate) @ self.sin)

    @classmethod
    def random(cls, group_id, base, rng, max_mode=2, amplitude=0.5):
        modes = [(a, b) for a in range(0, max_mode + 1) for b in range(-max_mode, max_mode + 1)
                 if (a, b) > (0, 0) or (a == 0 and b > 0)]
        modes = [(0, 0)] + [m for m in modes if m != (0, 0)]
        dim = get_group(group_id).dim
        scale = amplitude / (1.0 + np.linalg.norm(np.array(modes, float), axis=1))
        c = rng.standard_normal((len(modes), dim)) * scale[:, None]
        s = rng.standard_normal((len(modes), dim)) * scale[:, None]
        s[0] = 0.0
        return cls(group_id, base, modes, c, s)


class AmbientPolynomialField(AlgebraField):
    """Restriction to the sphere of an algebra-valued polynomial on ``R^3``.

    ``terms`` maps exponent triples ``(p, q, r)`` to coordinate vectors.
    """

    def __init__(self, group_id, base: RoundSphere, terms: dict, chart="north"):
        super().__init__(group_id)
        self.base = base
        self.terms = {tuple(k): np.asarray(v, float) for k, v in terms.items()}
        self.chart = chart

    def _poly(self, y):
        out = 0.0
        grad = np.zeros(y.shape + (self.group.dim,))
        for (p, q, r), coef in self.terms.items():
            mono = y[:, 0] ** p * y[:, 1] ** q * y[:, 2] ** r
            out = out + mono[:, None] * coef
            for i, e in enumerate((p, q, r)):
                if e:
                    ex = [p, q, r]
                    ex[i] -= 1
                    d = e * y[:, 0] ** ex[0] * y[:, 1] ** ex[1] * y[:, 2] ** ex[2]
                    grad[:, i] += d[:, None] * coef
        return out, grad

    def value(self, x):
        y, _ = self.base.embed(x, self.chart)
        val, _ = self._poly(y)
        return self.group.from_coords(np.broadcast_to(val, (len(y), self.group.dim)))

    def differential(self, x, v):
        y, jac = self.base.embed(x, self.chart)
        _, grad = self._poly(y)
        dy = np.einsum("tim,tm->ti", jac, np.atleast_2d(v))
        return self.group.from_coords(np.einsum("tia,ti->ta", grad, dy))

    @classmethod
    def random(cls, group_id, base, rng, degree=2, amplitude=0.5, chart="north"):
        dim = get_group(group_id).dim
        terms = {}
        for p in range(degree + 1):
            for q in range(degree + 1 - p):
                for r in range(degree + 1 - p - q):
                    terms[(p, q, r)] = amplitude * rng.standard_normal(dim) / (1 + p + q + r) / base.R ** (p + q + r)
        return cls(group_id, base, terms, chart)


class GaugeTransformation:
    """``gamma(x) = exp(Z(x))`` or, when based at ``x0``, ``exp(Z(x)) exp(Z(x0))^{-1}``.

    The based form satisfies ``gamma(x0) = e``.
    """

    def __init__(self, field: AlgebraField, based_at=None):
        self.field = field
        self.group_id = field.group_id
        self.based_at = None if based_at is None else np.asarray(based_at, float).reshape(1, 2)
        self._right = None
        if self.based_at is not None:
            g = field.group
            self._right = g.inv(g.exp(field.value(self.based_at)))[0]

    @property
    def group(self):
        return get_group(self.group_id)

    def value(self, x):
        g = self.group
        out = g.exp(self.field.value(x))
        return out if self._right is None else out @ self._right

    def differential(self, x, v):
        """``d gamma_x(v)`` via the block-triangular exponential."""
        g = self.group
        z = self.field.value(x)
        dz = self.field.differential(x, v)
        n = g.n
        big = np.zeros((len(z), 2 * n, 2 * n), dtype=complex)
        big[:, :n, :n] = z
        big[:, n:, n:] = z
        big[:, :n, n:] = dz
        block = scipy.linalg.expm(big)[:, :n, n:]
        if g.real:
            block = block.real
        return block if self._right is None else block @ self._right

    @classmethod
    def identity(cls, group_id, base):
        return cls(_ZeroField(group_id))


class _ZeroField(AlgebraField):
    def value(self, x):
        g = self.group
        return np.zeros((len(np.atleast_2d(x)), g.n, g.n), g.dtype)

    def differential(self, x, v):
        return self.value(x)


# ---------------------------------------------------------------------------
# connection forms


class ConnectionForm:
    """An algebra-valued 1-form ``A`` on the base; ``value(x, v)`` is linear in ``v``."""

    def __init__(self, group_id: str, base: BaseManifold):
        self.group_id = group_id
        self.base = base

    @property
    def group(self):
        return get_group(self.group_id)

    def components(self, x) -> np.ndarray:
        """``(T, 2, n, n)``: the form on the two chart coordinate vectors."""
        raise NotImplementedError

    def value(self, x, v) -> np.ndarray:
        return np.einsum("tmij,tm->tij", self.components(x), np.atleast_2d(v))

    def __add__(self, other):
        return LinearCombinationForm([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return LinearCombinationForm([(1.0, self), (-1.0, other)])

    def __rmul__(self, s):
        return LinearCombinationForm([(float(s), self)])

    __mul__ = __rmul__


class ZeroForm(ConnectionForm):
    def components(self, x):
        g = self.group
        return np.zeros((len(np.atleast_2d(x)), 2, g.n, g.n), g.dtype)


class TorusFourierForm(ConnectionForm):
    """Fourier table of the two components on a flat torus."""

    def __init__(self, group_id, base: FlatTorus, fields: tuple):
        super().__init__(group_id, base)
        self.fields = fields  # one TorusFourierField per component

    def components(self, x):
        return np.stack([f.value(x) for f in self.fields], axis=1)

    @classmethod
    def constant(cls, group_id, base, a1, a2):
        """``A = a1 dx^1 + a2 dx^2`` with constant algebra matrices."""
        g = get_group(group_id)
        fields = tuple(TorusFourierField(group_id, base, [(0, 0)], g.coords(a)[None], np.zeros((1, g.dim)))
                       for a in (a1, a2))
        return cls(group_id, base, fields)

    @classmethod
    def random(cls, group_id, base, rng, max_mode=2, amplitude=0.5):
        return cls(group_id, base, tuple(TorusFourierField.random(group_id, base, rng, max_mode, amplitude)
                                         for _ in range(2)))


class SphereAmbientForm(ConnectionForm):
    """Pull-back to the sphere of ``sum_i P_i(y) dy^i`` with polynomial coefficients."""

    def __init__(self, group_id, base: RoundSphere, fields: tuple, chart="north"):
        super().__init__(group_id, base)
        self.fields = fields  # three AmbientPolynomialField
        self.chart = chart

    def components(self, x):
        _, jac = self.base.embed(x, self.chart)
        vals = np.stack([f.value(x) for f in self.fields], axis=1)  # (T, 3, n, n)
        return np.einsum("tim,tijk->tmjk", jac, vals)

    def in_chart(self, chart):
        """Same form, evaluated through the other stereographic chart."""
        fields = tuple(AmbientPolynomialField(f.group_id, f.base, f.terms, chart) for f in self.fields)
        return SphereAmbientForm(self.group_id, self.base, fields, chart)

    @classmethod
    def random(cls, group_id, base, rng, degree=2, amplitude=0.5, chart="north"):
        return cls(group_id, base, tuple(AmbientPolynomialField.random(group_id, base, rng, degree, amplitude, chart)
                                         for _ in range(3)), chart)


class LinearCombinationForm(ConnectionForm):
    def __init__(self, terms):
        first = terms[0][1]
        super().__init__(first.group_id, first.base)
        self.terms = list(terms)

    def components(self, x):
        return sum(w * f.components(x) for w, f in self.terms)


class GaugedForm(ConnectionForm):
    """``Ad(gamma) A - d gamma gamma^{-1}``."""

    def __init__(self, gamma: GaugeTransformation, form: ConnectionForm):
        super().__init__(form.group_id, form.base)
        self.gamma = gamma
        self.form = form

    def components(self, x):
        x = np.atleast_2d(x)
        g = self.group
        gx = self.gamma.value(x)
        gi = g.inv(gx)
        inner = self.form.components(x)
        out = []
        for mu in range(2):
            v = np.zeros((len(x), 2))
            v[:, mu] = 1.0
            out.append(gx @ inner[:, mu] @ gi - self.gamma.differential(x, v) @ gi)
        return np.stack(out, axis=1)


def gauge_act_form(gamma: GaugeTransformation, form: ConnectionForm) -> ConnectionForm:
    return GaugedForm(gamma, form)


class PureGaugeForm(GaugedForm):
    """``gamma . 0 = -d gamma gamma^{-1}``: flat, with trivial holonomy along every loop.

    Its horizontal lift through ``(x0, e)`` is ``gamma(c(t)) gamma(x0)^{-1}``.
    """

    def __init__(self, gamma: GaugeTransformation, base: BaseManifold):
        super().__init__(gamma, ZeroForm(gamma.group_id, base))

    def lift(self, c: "BaseLoop", t: np.ndarray) -> np.ndarray:
        g = self.group
        vals = self.gamma.value(c.point(t))
        return vals @ g.inv(self.gamma.value(c.point(0.0)))


def pure_gauge(gamma: GaugeTransformation, base: BaseManifold) -> PureGaugeForm:
    """``gamma . 0``; a flat connection whose holonomy along every loop is trivial."""
    return PureGaugeForm(gamma, base)


def check_linearity(form: ConnectionForm, rng, samples: int = 16) -> float:
    x = rng.uniform(-1, 1, (samples, 2))
    v, w = rng.standard_normal((2, samples, 2))
    a, b = rng.standard_normal(2)
    lhs = form.value(x, a * v + b * w)
    rhs = a * form.value(x, v) + b * form.value(x, w)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# base loops


class BaseLoop:
    """Closed constant-speed chart curve ``c(t) = x0 + t w + sum_k a_k cos 2 pi k t + b_k sin 2 pi k t``.

    ``w`` must be a period vector of the base (zero on the sphere) so that the
    loop closes.  The claimed speed ``a`` is validated on a fine grid.
    """

    def __init__(self, base: BaseManifold, x0, winding=(0.0, 0.0), cos_coeffs=(), sin_coeffs=(),
                 speed: float | None = None, chart: str = "north", speed_tol: float = 1e-8):
        self.base = base
        self.x0 = np.asarray(x0, float).reshape(2)
        self.winding = np.asarray(winding, float).reshape(2)
        self.cos = np.asarray(cos_coeffs, float).reshape(-1, 2)
        self.sin = np.asarray(sin_coeffs, float).reshape(-1, 2)
        if len(self.cos) != len(self.sin):
            raise DomainError("cosine and sine coefficient lists must match in length")
        self.chart = chart
        if isinstance(base, FlatTorus):
            per = self.winding / np.array([base.L1, base.L2])
            if np.max(np.abs(per - np.round(per))) > 1e-12:
                raise DomainError("winding must be a period vector of the torus")
        elif np.any(self.winding != 0):
            raise DomainError("loops on the sphere cannot wind in the chart")
        t = np.linspace(0.0, 1.0, 4097)
        speeds = self.speed_profile(t)
        a = float(np.mean(speeds)) if speed is None else float(speed)
        if a <= 0:
            raise DomainError("speed must be positive")
        if np.max(np.abs(speeds - a)) > speed_tol:
            raise ConstantSpeedError(f"curve speed varies by {np.max(np.abs(speeds - a)):.3g} from a = {a}")
        self.speed = a

    def point(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        k = 2 * np.pi * np.arange(1, len(self.cos) + 1)
        return (self.x0 + np.outer(t, self.winding) + np.cos(np.outer(t, k)) @ self.cos
                + np.sin(np.outer(t, k)) @ self.sin)

    def velocity(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        k = 2 * np.pi * np.arange(1, len(self.cos) + 1)
        return (self.winding + (-np.sin(np.outer(t, k)) * k) @ self.cos
                + (np.cos(np.outer(t, k)) * k) @ self.sin)

    def speed_profile(self, t) -> np.ndarray:
        x, v = self.point(t), self.velocity(t)
        return np.sqrt(np.einsum("ti,tij,tj->t", v, self.base.metric(x), v))

    @classmethod
    def torus_circle(cls, base: FlatTorus, center, radius, m: int = 1):
        """Coordinate circle traversed ``m`` times; speed ``2 pi m radius``."""
        return cls(base, np.asarray(center, float), (0, 0), _single_mode(m, [radius, 0.0]),
                   _single_mode(m, [0.0, radius]), 2 * np.pi * m * radius)

    @classmethod
    def torus_line(cls, base: FlatTorus, x0, m: int, n: int):
        """Closed geodesic with winding ``(m L1, n L2)``."""
        w = (m * base.L1, n * base.L2)
        return cls(base, x0, w, speed=math.hypot(*w))

    @classmethod
    def sphere_latitude(cls, base: RoundSphere, latitude: float, m: int = 1, phase: float = 0.0):
        """Latitude circle in the north chart; speed ``2 pi m R cos(latitude)``."""
        rho = math.cos(latitude) / (1.0 - math.sin(latitude))
        c = np.zeros((m, 2))
        s = np.zeros((m, 2))
        c[m - 1] = [rho * math.cos(phase), rho * math.sin(phase)]
        s[m - 1] = [-rho * math.sin(phase), rho * math.cos(phase)]
        return cls(base, (0.0, 0.0), (0, 0), c, s, 2 * np.pi * m * base.R * math.cos(latitude))

    @classmethod
    def random_torus_loop(cls, base: FlatTorus, rng, speed: float):
        """Seeded circle or closed geodesic of the requested speed."""
        x0 = rng.uniform(0, 1, 2) * np.array([base.L1, base.L2])
        for _ in range(64):
            choice = rng.integers(0, 2)
            if choice == 0:
                m = int(rng.integers(1, 3))
                return cls.torus_circle(base, x0, speed / (2 * np.pi * m), m)
            # look for a lattice vector of exactly this length
            for m in range(-6, 7):
                for n in range(-6, 7):
                    if (m, n) != (0, 0) and abs(math.hypot(m * base.L1, n * base.L2) - speed) < 1e-12:
                        return cls.torus_line(base, x0, m, n)
        m = int(rng.integers(1, 3))
        return cls.torus_circle(base, x0, speed / (2 * np.pi * m), m)


def _single_mode(m, vec):
    out = np.zeros((m, 2))
    out[m - 1] = vec
    return out


# ---------------------------------------------------------------------------
# lifts, pull-back map and holonomy


def _form_along(form: ConnectionForm, c: BaseLoop, t) -> np.ndarray:
    return form.value(c.point(t), c.velocity(t))


def _right_rkmk4(coef, N: int, group) -> np.ndarray:
    """Solve ``y' = coef(t) y``, ``y(0) = e`` with a right-trivialized RKMK4; returns all ``N + 1`` samples."""
    h = 1.0 / N
    t = np.arange(N) * h
    a1, a2, a3 = coef(t), coef(t + 0.5 * h), coef(t + h)

    def dexpinv(theta, a):
        c1 = theta @ a - a @ theta
        return a - 0.5 * c1 + (theta @ c1 - c1 @ theta) / 12.0

    f1 = h * a1
    f2 = h * dexpinv(0.5 * f1, a2)
    f3 = h * dexpinv(0.5 * f2, a2)
    f4 = h * dexpinv(f3, a3)
    steps = group.exp((f1 + 2 * f2 + 2 * f3 + f4) / 6.0)
    y = np.empty((N + 1, group.n, group.n), dtype=group.dtype)
    y[0] = group.identity
    for i in range(N):
        y[i + 1] = steps[i] @ y[i]
    return y


def horizontal_lift(c: BaseLoop, omega0: ConnectionForm, N: int = 1024, method: str = "auto") -> GroupPath:
    """Fibre component ``h`` of the lift through ``(c(0), e)``: ``h' = -A0(c') h``.

    ``method="ode"`` integrates the lift equation; ``"auto"`` uses the closed
    form when ``omega0`` is pure gauge (then the lift is a smooth loop).
    """
    g = omega0.group
    if method not in ("auto", "ode", "exact"):
        raise DomainError(f"unknown lift method {method!r}")
    if method != "ode" and isinstance(omega0, PureGaugeForm):
        t = np.arange(N + 1) / N
        samples = omega0.lift(c, t)
        samples[-1] = samples[0]
        return GroupPath(omega0.group_id, samples, periodic=True)
    if method == "exact":
        raise DomainError("closed-form lift needs a pure-gauge reference connection")
    samples = _right_rkmk4(lambda t: -_form_along(omega0, c, t), N, g)
    return GroupPath(omega0.group_id, samples, periodic=False)


def horizontality_residual(c: BaseLoop, omega0: ConnectionForm, sigma: GroupPath) -> float:
    """Max of ``|omega0(sigma')| = |Ad(h^{-1}) A0(c') + h^{-1} h'|`` over the grid."""
    g = omega0.group
    h = sigma.samples
    t = np.arange(sigma.N + 1) / sigma.N
    hi = g.inv(h)
    val = hi @ _form_along(omega0, c, t) @ h + hi @ sigma.derivative()
    return float(np.max(g.norm(val)))


def _mu_samples(values_along: np.ndarray, values0_along: np.ndarray, sigma: GroupPath) -> np.ndarray:
    g = sigma.group
    h = sigma.samples
    return g.inv(h) @ (values_along - values0_along) @ h


def mu_c(omega, c: BaseLoop, sigma: GroupPath, omega0: ConnectionForm | None = None) -> AlgebraLoop:
    """Pull-back loop ``t -> Ad(h^{-1}) (A - A0)(c')``.

    ``omega`` is a ConnectionForm or a CurveSupportedForm; in the latter case
    (and when ``omega0`` is omitted) the linear part is returned.  The loop is
    flagged closed when its endpoint values agree to 1e-10.
    """
    N = sigma.N
    t = np.arange(N + 1) / N
    if isinstance(omega, CurveSupportedForm):
        vals = omega.along(c, sigma)
    else:
        if omega.base != c.base:
            raise DomainError("connection and loop live on different bases")
        vals = _form_along(omega, c, t)
    vals0 = 0.0 if omega0 is None else _form_along(omega0, c, t)
    out = _mu_samples(vals, vals0, sigma)
    g = sigma.group
    out = 0.5 * (out - g.inv(out))
    closed = bool(np.max(np.abs(out[0] - out[-1])) < 1e-10)
    if closed:
        out[-1] = out[0]
    return AlgebraLoop(sigma.group_id, out, closed)


def hol_c(omega: ConnectionForm, c: BaseLoop, omega0: ConnectionForm, N: int = 1024,
          scheme: str = "rkmk4", sigma: GroupPath | None = None) -> np.ndarray:
    """Holonomy map as the transport endpoint of the pull-back loop."""
    if sigma is None:
        sigma = horizontal_lift(c, omega0, N)
    return phi(mu_c(omega, c, sigma, omega0), scheme)


def hol_direct(omega: ConnectionForm, c: BaseLoop, omega0: ConnectionForm, N: int = 1024) -> np.ndarray:
    """``k(1)^{-1} h(1)`` from the two bundle lifts, evaluated on the exact curve."""
    g = omega.group
    k = _right_rkmk4(lambda t: -_form_along(omega, c, t), N, g)[-1]
    h = _right_rkmk4(lambda t: -_form_along(omega0, c, t), N, g)[-1]
    return g.inv(k) @ h


def factorization_residual(omega, c, omega0, N=1024, scheme="rkmk4") -> float:
    return float(np.linalg.norm(hol_c(omega, c, omega0, N, scheme) - hol_direct(omega, c, omega0, N)))


def lambda_c(gamma: GaugeTransformation, c: BaseLoop, sigma: GroupPath) -> GroupPath:
    """``t -> h(t)^{-1} gamma(c(t)) h(t)``, the gauge transformation read along the lift."""
    g = sigma.group
    t = np.arange(sigma.N + 1) / sigma.N
    h = sigma.samples
    vals = g.inv(h) @ gamma.value(c.point(t)) @ h
    periodic = sigma.periodic and float(np.max(np.abs(vals[0] - vals[-1]))) < 1e-12
    if periodic:
        vals[-1] = vals[0]
    return GroupPath(sigma.group_id, vals, periodic=periodic)


@dataclass
class GaugeReport:
    pullback_equivariance: float      # |mu(gamma.omega) - lambda.mu(omega)| (sup norm)
    conjugation: float                # |hol(gamma.omega) - Ad(gamma(x0)) hol(omega)|
    general_conjugation: float        # |hol(gamma.omega) - lambda(0) hol(omega) lambda(1)^{-1}|
    reference_holonomy: float         # |h(1) - e|

    def as_dict(self):
        return dict(self.__dict__)


def gauge_relations(omega, c, omega0, gamma: GaugeTransformation, N=1024, scheme="rkmk4") -> GaugeReport:
    g = omega.group
    sigma = horizontal_lift(c, omega0, N)
    lam = lambda_c(gamma, c, sigma)
    mu = mu_c(omega, c, sigma, omega0)
    mu_g = mu_c(GaugedForm(gamma, omega), c, sigma, omega0)
    acted = gauge_act(lam, mu)
    pe = float(np.max(g.norm(acted.samples - mu_g.samples)))
    hol = phi(mu, scheme)
    hol_g = phi(mu_g, scheme)
    g0 = gamma.value(c.point(0.0))[0]
    conj = float(np.linalg.norm(hol_g - g0 @ hol @ g.inv(g0)))
    gen = float(np.linalg.norm(hol_g - lam.samples[0] @ hol @ g.inv(lam.samples[-1])))
    ref = float(np.linalg.norm(sigma.samples[-1] - g.identity))
    return GaugeReport(pe, conj, gen, ref)


def class_function_invariance(omega, c, gamma, omega0, N=1024, scheme="rkmk4", other=None) -> float:
    """``max_k |tr hol(gamma.omega)^k - tr hol(omega)^k|`` for ``k = 1..n``.

    With ``other`` given, compares ``omega`` against that connection instead of
    its gauge transform (a cross-orbit control).
    """
    g = omega.group
    sigma = horizontal_lift(c, omega0, N)
    a = hol_c(omega, c, omega0, N, scheme, sigma)
    target = other if other is not None else GaugedForm(gamma, omega)
    b = hol_c(target, c, omega0, N, scheme, sigma)
    res = 0.0
    pa, pb = np.eye(g.n), np.eye(g.n)
    for _ in range(g.n):
        pa, pb = pa @ a, pb @ b
        res = max(res, abs(np.trace(pa) - np.trace(pb)))
    return float(res)


# ---------------------------------------------------------------------------
# curve-supported tangent vectors and the homothety coefficient


class CurveSupportedForm:
    """Tangent vector to connection space concentrated on a loop.

    At parameter ``t`` it is the algebra-valued covector
    ``eta(t) = theta(t) (x) Ad(h(t)) xi(t)`` where ``theta(c') = 1`` and
    ``theta`` annihilates the metric-orthogonal direction.  Its pairing with a
    smooth form ``A`` is ``int <eta(t), A_{c(t)}> dt`` (base metric inverse on
    the covector slot, algebra inner product on the values).
    """

    def __init__(self, xi: AlgebraLoop, loop: BaseLoop, sigma: GroupPath):
        if xi.N != sigma.N:
            raise DomainError("profile and lift must share a grid")
        self.xi = xi
        self.loop = loop
        self.sigma = sigma
        t = np.arange(xi.N + 1) / xi.N
        self.t = t
        x = loop.point(t)
        v = loop.velocity(t)
        gm = loop.base.metric(x)
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        normal = np.einsum("ij,tjk,tk->ti", rot, gm, v)  # g c' rotated: theta must vanish on J g c'
        rows = np.stack([v, normal], axis=1)
        rhs = np.zeros((len(t), 2))
        rhs[:, 0] = 1.0
        self.theta = np.linalg.solve(rows, rhs[..., None])[..., 0]
        self.metric = gm
        grp = xi.group
        h = sigma.samples
        self.values = h @ xi.samples @ grp.inv(h)  # Ad(h) xi

    def covector_norm_sq(self) -> np.ndarray:
        """``|theta|^2`` at each grid point."""
        ginv = np.linalg.inv(self.metric)
        return np.einsum("ti,tij,tj->t", self.theta, ginv, self.theta)

    def pointwise_norm_sq(self) -> np.ndarray:
        """``<eta, eta>`` at each grid point."""
        grp = self.xi.group
        return self.covector_norm_sq() * grp.inner(self.values, self.values)

    def norm_sq(self) -> float:
        f = self.pointwise_norm_sq()
        return float((np.sum(f) - 0.5 * (f[0] + f[-1])) / self.xi.N)

    def along(self, c: BaseLoop, sigma: GroupPath) -> np.ndarray:
        """Value of the form on the loop velocity, ``eta(t)(c'(t))``."""
        if c is not self.loop:
            raise DomainError("a curve-supported form can only be evaluated along its own loop")
        v = c.velocity(self.t)
        return np.einsum("tm,tm->t", self.theta, v)[:, None, None] * self.values

    def pair(self, form: ConnectionForm) -> float:
        """Reproducing pairing with a smooth tangent form."""
        grp = self.xi.group
        ginv = np.linalg.inv(self.metric)
        x = self.loop.point(self.t)
        comps = form.components(x)  # (T, 2, n, n)
        raised = np.einsum("tmn,tn->tm", ginv, self.theta)
        dual = np.einsum("tm,tmij->tij", raised, comps)
        f = grp.inner(self.values, dual)
        return float((np.sum(f) - 0.5 * (f[0] + f[-1])) / self.xi.N)


@dataclass
class HomothetyReport:
    speed: float
    speed_deviation: float
    pointwise_residual: float
    form_norm_sq: float
    image_norm_sq: float
    ratio: float
    ratio_error: float
    image_residual: float
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(self.__dict__)


def check_homothety(c: BaseLoop, xi: AlgebraLoop, omega0: ConnectionForm,
                    sigma: GroupPath | None = None, speed_tol: float = 1e-6) -> HomothetyReport:
    """Verify ``|d mu_c(A)|^2 = a^2 <A, A>`` for the curve-supported form with profile ``xi``."""
    if not xi.closed:
        raise DomainError("profile must be a closed loop")
    if sigma is None:
        sigma = horizontal_lift(c, omega0, xi.N)
    a = c.speed
    t = np.arange(xi.N + 1) / xi.N
    dev = float(np.max(np.abs(c.speed_profile(t) - a)))
    if dev > speed_tol:
        raise ConstantSpeedError(f"lift speed deviates from a = {a} by {dev:.3g}")
    A = CurveSupportedForm(xi, c, sigma)
    grp = xi.group
    xi_sq = grp.inner(xi.samples, xi.samples)
    point = A.pointwise_norm_sq()
    pointwise = float(np.max(np.abs(point - xi_sq / a ** 2)))
    image = mu_c(A, c, sigma)
    image_res = float(np.max(grp.norm(image.samples - xi.samples)))
    form_sq = A.norm_sq()
    image_sq = l2_inner(image, image)
    if form_sq == 0.0:
        ratio, err = math.nan, 0.0 if image_sq == 0.0 else math.inf
    else:
        ratio = image_sq / form_sq
        err = abs(ratio - a ** 2)
    return HomothetyReport(a, dev, pointwise, form_sq, image_sq, ratio, err, image_res)
