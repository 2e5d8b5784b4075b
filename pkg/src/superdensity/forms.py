"""Exterior algebra on R^n, form fields, exterior derivative and pairing experiments."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .measure_core import Box, ContractViolation, ImplicitRegion, rasterize


# ---------------------------------------------------------------- multi-indices

@lru_cache(maxsize=None)
def basis(n, k):
    """``I(n, k)``: increasing k-tuples of ``1..n`` in lexicographic order."""
    if k < 0 or k > n:
        return ()
    return tuple(itertools.combinations(range(1, n + 1), k))


@lru_cache(maxsize=None)
def _position(n, k):
    return {a: i for i, a in enumerate(basis(n, k))}


@dataclass(frozen=True)
class MultiIndex:
    n: int
    entries: tuple

    def __post_init__(self):
        e = tuple(int(v) for v in self.entries)
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ContractViolation(f"multi-index {e} is not strictly increasing")
        if e and (e[0] < 1 or e[-1] > self.n):
            raise ContractViolation(f"multi-index {e} leaves 1..{self.n}")
        object.__setattr__(self, "entries", e)

    @property
    def k(self):
        return len(self.entries)

    def complement(self):
        return MultiIndex(self.n, tuple(i for i in range(1, self.n + 1) if i not in self.entries))


def merge_sign(a, b):
    """Sign of the permutation sorting the concatenation ``a + b``; 0 on a repeat."""
    if set(a) & set(b):
        return 0
    inversions = sum(1 for x in a for y in b if x > y)
    return -1 if inversions % 2 else 1


def permutation_sign(seq):
    """Parity by explicit cycle decomposition (independent of ``merge_sign``)."""
    seq = list(seq)
    if len(set(seq)) < len(seq):
        return 0
    order = sorted(range(len(seq)), key=seq.__getitem__)
    seen, sign = [False] * len(seq), 1
    for i in range(len(seq)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------- covectors

@dataclass(frozen=True, eq=False)
class Covector:
    n: int
    k: int
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).reshape(-1)
        if c.size != len(basis(self.n, self.k)):
            raise ContractViolation(f"need {len(basis(self.n, self.k))} coefficients for I({self.n},{self.k})")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zero(cls, n, k):
        return cls(n, k, np.zeros(len(basis(n, k))))

    @classmethod
    def from_dict(cls, n, k, coeffs):
        c = np.zeros(len(basis(n, k)))
        pos = _position(n, k)
        for alpha, v in coeffs.items():
            alpha = MultiIndex(n, alpha).entries
            if len(alpha) != k:
                raise ContractViolation(f"index {alpha} has degree {len(alpha)}, expected {k}")
            c[pos[alpha]] += v
        return cls(n, k, c)

    @classmethod
    def dx(cls, n, *alpha):
        """The basis covector ``dx_alpha``."""
        return cls.from_dict(n, len(alpha), {tuple(alpha): 1.0})

    def __getitem__(self, alpha):
        return float(self.coefficients[_position(self.n, self.k)[tuple(alpha)]])

    def items(self):
        return zip(basis(self.n, self.k), self.coefficients)

    def __add__(self, other):
        _same(self, other)
        return Covector(self.n, self.k, self.coefficients + other.coefficients)

    def __sub__(self, other):
        _same(self, other)
        return Covector(self.n, self.k, self.coefficients - other.coefficients)

    def __mul__(self, s):
        return Covector(self.n, self.k, self.coefficients * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __xor__(self, other):
        return wedge(self, other)

    def allclose(self, other, atol=0.0):
        return self.n == other.n and self.k == other.k and np.allclose(
            self.coefficients, other.coefficients, rtol=0.0, atol=atol)


def _same(a, b):
    if a.n != b.n or a.k != b.k:
        raise ContractViolation(f"degree mismatch: ({a.n},{a.k}) vs ({b.n},{b.k})")


@lru_cache(maxsize=None)
def wedge_table(n, k1, k2):
    """Triples ``(i, j, sign, out)`` with ``dx_{a_i} ∧ dx_{b_j} = sign dx_{c_out}``."""
    pos = _position(n, k1 + k2)
    rows = []
    for i, a in enumerate(basis(n, k1)):
        for j, b in enumerate(basis(n, k2)):
            s = merge_sign(a, b)
            if s:
                rows.append((i, j, s, pos[tuple(sorted(a + b))]))
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def wedge_coefficients(n, k1, a, k2, b):
    """Wedge of coefficient arrays with a leading batch axis."""
    t = wedge_table(n, k1, k2)
    out = np.zeros(a.shape[:-1] + (len(basis(n, k1 + k2)),))
    if len(t):
        np.add.at(out.T, t[:, 3], (a[..., t[:, 0]] * b[..., t[:, 1]] * t[:, 2]).T)
    return out


def wedge(xi, eta):
    if xi.n != eta.n:
        raise ContractViolation("wedge of covectors on different spaces")
    n, k = xi.n, xi.k + eta.k
    if k > n:
        return Covector(n, k, np.zeros(0))
    return Covector(n, k, wedge_coefficients(n, xi.k, xi.coefficients, eta.k, eta.coefficients))


def inner_product(xi, eta):
    _same(xi, eta)
    return float(xi.coefficients @ eta.coefficients)


def top_coefficient(xi):
    """``<xi, dx_1 ∧ ... ∧ dx_n>`` for an n-covector."""
    if xi.k != xi.n:
        raise ContractViolation(f"top coefficient needs an n-covector, got degree {xi.k}")
    return float(xi.coefficients[0])


def pairing_vector(xi):
    """``<xi ∧ dx_{beta-bar}, dx>`` for every beta in ``I(n, k)``."""
    n, k = xi.n, xi.k
    out = np.empty(len(basis(n, k)))
    for i, beta in enumerate(basis(n, k)):
        comp = MultiIndex(n, beta).complement().entries
        out[i] = top_coefficient(wedge(xi, Covector.dx(n, *comp)))
    return out


def sign_table(n, k):
    """``sign(beta)`` with ``<dx_beta ∧ dx_{beta-bar}, dx> = sign(beta)``."""
    return np.array([permutation_sign(beta + MultiIndex(n, beta).complement().entries)
                     for beta in basis(n, k)], dtype=float)


def nondegeneracy_check(xi):
    """Pairings against the complementary basis recover ``±xi_beta`` exactly,
    so they all vanish precisely when ``xi`` does."""
    pv = pairing_vector(xi)
    recovered = np.array_equal(pv, sign_table(xi.n, xi.k) * xi.coefficients)
    return recovered and (bool(np.all(pv == 0)) == bool(np.all(xi.coefficients == 0)))


# ---------------------------------------------------------------- scalar fields

class Field:
    """A scalar field on R^n evaluated on ``(N, n)`` arrays.

    ``grads`` optionally holds analytic partial derivatives: a sequence of
    fields, or a zero-argument callable producing one (evaluated lazily, so
    product-rule chains are only expanded as far as they are used).
    """

    def __init__(self, n, fn, grads=None, label=""):
        self.n = n
        self.fn = fn
        self._grads_src = grads
        self._grads = None
        self.label = label

    @property
    def analytic(self):
        return self._grads_src is not None

    @property
    def grads(self):
        if self._grads_src is None:
            return None
        if self._grads is None:
            src = self._grads_src
            self._grads = tuple(src() if callable(src) else src)
        return self._grads

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.broadcast_to(np.asarray(self.fn(p), dtype=float), (len(p),))

    def partial(self, i, step=1e-5):
        """``D_i`` (0-based axis); central differences when no analytic partial."""
        if self.analytic:
            return self.grads[i]
        return fd_partial(self, i, step)

    def __add__(self, other):
        other = as_field(other, self.n)
        grads = None
        if self.analytic and other.analytic:
            grads = lambda: [a + b for a, b in zip(self.grads, other.grads)]
        return Field(self.n, lambda p: self(p) + other(p), grads)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_field(other, self.n))

    def __rsub__(self, other):
        return as_field(other, self.n) - self

    def __mul__(self, other):
        if np.isscalar(other):
            s = float(other)
            if s == 0:
                return constant(self.n, 0.0)
            grads = (lambda: [g * s for g in self.grads]) if self.analytic else None
            return Field(self.n, lambda p: s * self(p), grads)
        other = as_field(other, self.n)
        grads = None
        if self.analytic and other.analytic:
            grads = lambda: [a * other + self * b for a, b in zip(self.grads, other.grads)]
        return Field(self.n, lambda p: self(p) * other(p), grads)

    __rmul__ = __mul__

    def compose_affine(self, x, r):
        """``y -> self((y - x) / r)``."""
        x = np.asarray(x, dtype=float)
        grads = None
        if self.analytic:
            grads = lambda: [g.compose_affine(x, r) * (1.0 / r) for g in self.grads]
        return Field(self.n, lambda p: self((p - x) / r), grads)


def fd_partial(f, i, step):
    e = np.zeros(f.n)
    e[i] = step
    return Field(f.n, lambda p: (f(p + e) - f(p - e)) / (2 * step), None, f"fd D{i + 1}")


class Poly(Field):
    """A polynomial ``sum c * y^e`` stored as ``{exponent tuple: coefficient}``."""

    def __init__(self, n, terms):
        self.terms = {tuple(int(v) for v in e): float(c) for e, c in terms.items() if c != 0}
        for e in self.terms:
            if len(e) != n or min(e) < 0:
                raise ContractViolation(f"bad exponent {e}")
        super().__init__(n, self._eval, None, "poly")

    def _eval(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(len(p))
        if not self.terms:
            return out
        top = max(max(e) for e in self.terms)
        powers = np.ones((top + 1,) + p.shape)
        for k in range(1, top + 1):
            powers[k] = powers[k - 1] * p
        axes = np.arange(self.n)
        for e, c in self.terms.items():
            out += c * np.prod(powers[list(e), :, axes], axis=0)
        return out

    @property
    def analytic(self):
        return True

    @property
    def grads(self):
        return tuple(self.derivative(i) for i in range(self.n))

    def derivative(self, i):
        terms = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                d = list(e)
                d[i] -= 1
                terms[tuple(d)] = terms.get(tuple(d), 0.0) + c * e[i]
        return Poly(self.n, terms)

    def partial(self, i, step=1e-5):
        return self.derivative(i)

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def __add__(self, other):
        if isinstance(other, Poly):
            t = dict(self.terms)
            for e, c in other.terms.items():
                t[e] = t.get(e, 0.0) + c
            return Poly(self.n, t)
        if np.isscalar(other):
            return self + constant(self.n, other)
        return Field.__add__(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            return Poly(self.n, {e: c * float(other) for e, c in self.terms.items()})
        if isinstance(other, Poly):
            t = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    t[e] = t.get(e, 0.0) + c1 * c2
            return Poly(self.n, t)
        return Field.__mul__(self, other)

    __rmul__ = __mul__

    @classmethod
    def random(cls, n, degree, rng, scale=1.0):
        terms = {}
        for e in itertools.product(range(degree + 1), repeat=n):
            if sum(e) <= degree:
                terms[e] = rng.normal(0.0, scale)
        return cls(n, terms)


def constant(n, c):
    return Poly(n, {(0,) * n: float(c)})


def coordinate(n, i):
    """``y -> y_i`` with 1-based i."""
    e = [0] * n
    e[i - 1] = 1
    return Poly(n, {tuple(e): 1.0})


def as_field(v, n):
    if isinstance(v, Field):
        return v
    if np.isscalar(v):
        return constant(n, v)
    raise ContractViolation(f"cannot use {type(v).__name__} as a scalar field")


def bump_field(n, center, radius, amplitude=1.0):
    """``amplitude * exp(-1 / (1 - |z|^2))`` with ``z = (y - center) / radius``."""
    c = np.asarray(center, dtype=float)
    R = float(radius)

    def value(p):
        z = (p - c) / R
        s = np.sum(z * z, axis=1)
        out = np.zeros(len(p))
        m = s < 1
        out[m] = amplitude * np.exp(-1.0 / (1.0 - s[m]))
        return out

    def grad(i):
        def fn(p):
            z = (p - c) / R
            s = np.sum(z * z, axis=1)
            out = np.zeros(len(p))
            m = s < 1
            out[m] = amplitude * np.exp(-1.0 / (1.0 - s[m])) * (-2.0 * z[m, i] / (1.0 - s[m]) ** 2) / R
            return out
        return Field(n, fn, None, f"D{i + 1} bump")

    return Field(n, value, [grad(i) for i in range(n)], "bump")


# ---------------------------------------------------------------- form fields

@dataclass(frozen=True, eq=False)
class FormField:
    """A degree-h form ``sum f_alpha dx_alpha``; coefficients follow ``basis(n, h)``."""

    n: int
    degree: int
    coefficients: tuple
    smoothness: str = "C1"
    support: Optional[Box] = None
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.smoothness not in ("C0", "C1", "C2"):
            raise ContractViolation(f"unknown smoothness tag {self.smoothness!r}")
        coeffs = tuple(as_field(c, self.n) for c in self.coefficients)
        if len(coeffs) != len(basis(self.n, self.degree)):
            raise ContractViolation(f"need {len(basis(self.n, self.degree))} coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_dict(cls, n, h, coeffs, **kw):
        pos = _position(n, h)
        c = [constant(n, 0.0) for _ in basis(n, h)]
        for alpha, f in coeffs.items():
            c[pos[tuple(alpha)]] = c[pos[tuple(alpha)]] + as_field(f, n)
        return cls(n, h, tuple(c), **kw)

    @classmethod
    def zero(cls, n, h, **kw):
        return cls(n, h, tuple(constant(n, 0.0) for _ in basis(n, h)), **kw)

    @property
    def analytic(self):
        return all(c.analytic for c in self.coefficients)

    def __call__(self, points):
        """Coefficient array of shape ``(N, |I(n, h)|)``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.coefficients:
            return np.zeros((len(p), 0))
        return np.stack([c(p) for c in self.coefficients], axis=1)

    def at(self, point):
        return Covector(self.n, self.degree, self(point)[0])

    def __add__(self, other):
        if (self.n, self.degree) != (other.n, other.degree):
            raise ContractViolation("adding forms of different degree")
        return FormField(self.n, self.degree, tuple(a + b for a, b in zip(self.coefficients, other.coefficients)),
                         _min_smooth(self.smoothness, other.smoothness), _hull(self.support, other.support),
                         self.fd_step)

    def __mul__(self, s):
        return FormField(self.n, self.degree, tuple(c * s for c in self.coefficients),
                         self.smoothness, self.support, self.fd_step)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def scale_by(self, f):
        """Multiply every coefficient by a scalar field."""
        return FormField(self.n, self.degree, tuple(c * f for c in self.coefficients),
                         self.smoothness, self.support, self.fd_step)


def _min_smooth(a, b):
    return min(a, b)


def _hull(a, b):
    if a is None or b is None:
        return None
    return a.hull(b)


def _meet(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a.intersection(b)


def form_wedge(lam, mu):
    """Pointwise wedge of form fields."""
    if lam.n != mu.n:
        raise ContractViolation("wedge of forms on different spaces")
    n, k = lam.n, lam.degree + mu.degree
    if k > n:
        return FormField(n, k, (), "C2")
    out = [constant(n, 0.0) for _ in basis(n, k)]
    for i, j, s, o in wedge_table(n, lam.degree, mu.degree):
        out[o] = out[o] + lam.coefficients[i] * mu.coefficients[j] * float(s)
    return FormField(n, k, tuple(out), _min_smooth(lam.smoothness, mu.smoothness),
                     _meet(lam.support, mu.support), lam.fd_step)


def exterior_derivative(omega):
    """``d omega = sum_alpha sum_i D_i f_alpha dx_i ∧ dx_alpha``.

    Analytic partials are used where the coefficients carry them; central
    differences with step ``omega.fd_step`` otherwise.
    """
    if omega.smoothness == "C0":
        raise ContractViolation("exterior derivative needs a C1 form")
    n, h = omega.n, omega.degree
    if h >= n:
        return FormField(n, h + 1, (), "C0", omega.support, omega.fd_step)
    pos = _position(n, h + 1)
    out = [constant(n, 0.0) for _ in basis(n, h + 1)]
    for alpha, f in zip(basis(n, h), omega.coefficients):
        for i in range(1, n + 1):
            s = merge_sign((i,), alpha)
            if s:
                out[pos[tuple(sorted((i,) + alpha))]] = out[pos[tuple(sorted((i,) + alpha))]] + f.partial(i - 1, omega.fd_step) * float(s)
    smooth = {"C2": "C1", "C1": "C0"}[omega.smoothness]
    return FormField(n, h + 1, tuple(out), smooth, omega.support, omega.fd_step)


def max_abs(form, points):
    """``max_alpha |f_alpha|`` at each point."""
    v = form(points)
    return np.max(np.abs(v), axis=1) if v.shape[1] else np.zeros(len(v))


# ---------------------------------------------------------------- integration

@dataclass(frozen=True)
class Integral:
    value: float
    error: float


def box_integral(fn, box, samples_per_axis=256, region=None, levels=1):
    """Midpoint rule over ``box`` (optionally restricted to ``region``), with the
    last-two-levels difference as error. ``samples_per_axis`` is the finest level."""
    n = box.dimension
    vals = []
    for lev in range(levels, -1, -1):
        k = max(samples_per_axis // 2 ** lev, 2)
        h = box.sides / k
        axes = [box.lower[i] + (np.arange(k) + 0.5) * h[i] for i in range(n)]
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=1)
        w = fn(pts)
        if region is not None:
            w = np.where(region.contains(pts), w, 0.0)
        vals.append(float(np.sum(w)) * float(np.prod(h)))
    return Integral(vals[-1], abs(vals[-1] - vals[-2]))


def integrate_form(omega, E, q=None, samples_per_axis=256):
    """``∫_E <omega, dx>`` over the effective support of omega clipped to E's box."""
    if omega.degree != omega.n:
        raise ContractViolation(f"can only integrate n-forms, got degree {omega.degree}")
    box = E.bbox if omega.support is None else E.bbox.intersection(omega.support)
    if not np.all(np.isfinite(box.lower + box.upper)):
        raise ContractViolation("integration domain is unbounded")
    if box.is_degenerate:
        return Integral(0.0, 0.0)
    K = samples_per_axis if q is None else q.samples_per_axis
    return box_integral(lambda p: omega.coefficients[0](p), box, K, E)


def weak_pairing_residual(lam, Delta, omega, window=None, samples_per_axis=256):
    """``∫ Δ∧ω − ∫ λ∧dω`` together with the scale ``|∫Δ∧ω| + |∫λ∧dω|``."""
    n, h = lam.n, lam.degree
    if Delta.degree != h + 1 or omega.degree != n - h - 1:
        raise ContractViolation("degrees must be h, h+1 and n-h-1")
    if omega.support is None:
        raise ContractViolation("test form needs a declared compact support")
    if window is not None and omega.support.intersection(window).volume < omega.support.volume:
        raise ContractViolation("test form support escapes the quadrature window")
    box = omega.support
    a = form_wedge(Delta, omega)
    b = form_wedge(lam, exterior_derivative(omega))
    A = box_integral(lambda p: a.coefficients[0](p), box, samples_per_axis)
    B = box_integral(lambda p: b.coefficients[0](p), box, samples_per_axis)
    return A.value - B.value, abs(A.value) + abs(B.value), A.error + B.error


def bump_battery(n, degree, count, rng, window=None):
    """Random compactly supported forms: polynomial times bump coefficients."""
    window = window or Box.cube(n, 1.0)
    out = []
    for _ in range(count):
        R = rng.uniform(0.2, 0.5)
        c = rng.uniform(np.asarray(window.lower) + R, np.asarray(window.upper) - R)
        b = bump_field(n, c, R)
        coeffs = [Poly.random(n, 1, rng) * b for _ in basis(n, degree)]
        out.append(FormField(n, degree, tuple(coeffs), "C2", Box(c - R, c + R)))
    return out


def random_poly_form(n, h, rng, degree=3):
    return FormField(n, h, tuple(Poly.random(n, degree, rng) for _ in basis(n, h)), "C2")


# ---------------------------------------------------------------- tangency experiment

@dataclass(frozen=True)
class TangencyRow:
    x: tuple
    cls: str
    exponent: Optional[float]
    verdict: str
    dmu: float


@dataclass(frozen=True)
class TangencyReport:
    rows: tuple
    tol_dmu: float
    noise_floor: float
    c_big: float
    vacuous: bool
    violations_i: tuple
    violations_ii: tuple
    identity_residuals: tuple
    stokes_residuals: tuple
    identity_tol: float

    @property
    def identity_ok(self):
        return all(v <= self.identity_tol for v in self.identity_residuals + self.stokes_residuals)

    @property
    def passed(self):
        return not self.violations_i and not self.violations_ii and self.identity_ok


def coincidence_set(Delta, mu, window, eps_eq=1e-9):
    """``{y in window : max_alpha |Δ_alpha(y) − μ_alpha(y)| <= eps_eq}``."""
    diff = Delta - mu

    def member(p):
        return window.contains(p) & (max_abs(diff, p) <= eps_eq)

    return ImplicitRegion(Delta.n, member, window, "coincidence")


def _identity_terms(Delta, mu, theta, psi, x, r, samples_per_axis):
    """Localized Stokes identity around x at radius r.

    Returns ``(lhs, I, J, mass)``: ``lhs = ∫ Γ ψ_r``, the two sides I and J
    (J is taken over all of R^n since its integrand vanishes on the
    coincidence set), and ``mass``, the integral of the absolute integrands,
    used to normalize residuals.
    """
    n, h = Delta.n, Delta.degree - 1
    psi_r = psi.compose_affine(x, r)
    box = Box(np.asarray(x) - r, np.asarray(x) + r)
    dpsi = exterior_derivative(FormField(n, 0, (psi_r,), "C2"))
    dtheta = exterior_derivative(theta)
    sign = (-1.0) ** h
    gamma = form_wedge(exterior_derivative(mu), theta)
    I_a = form_wedge(form_wedge(dpsi, Delta), theta)
    I_b = form_wedge(Delta, dtheta)
    diff = Delta - mu
    J_a = form_wedge(form_wedge(dpsi, diff), theta)
    J_b = form_wedge(-diff, dtheta)
    parts = {
        "lhs": lambda p: gamma.coefficients[0](p) * psi_r(p),
        "Ia": lambda p: -I_a.coefficients[0](p),
        "Ib": lambda p: sign * psi_r(p) * I_b.coefficients[0](p),
        "Ja": lambda p: J_a.coefficients[0](p),
        "Jb": lambda p: sign * psi_r(p) * J_b.coefficients[0](p),
    }
    vals = {k: box_integral(f, box, samples_per_axis).value for k, f in parts.items()}
    mass = sum(box_integral(lambda p, f=f: np.abs(f(p)), box, samples_per_axis).value
               for f in parts.values())
    return vals["lhs"], vals["Ia"] + vals["Ib"], vals["Ja"] + vals["Jb"], mass


def tangency_experiment(Delta, mu, window, samples, ladder, q=None, eps_eq=1e-9,
                         c_big=0.1, thetas=None, identity_points=None, identity_tol=1e-4,
                         samples_per_axis=256, config=None):
    """Degree verdicts at ``m = n + 1`` on the coincidence set against ``|dμ|``.

    ``identity_points`` are centres where the localized Stokes identity
    ``∫Γψ_r = I(r) + J(r)`` and ``I(r) = 0`` are checked for every theta.
    """
    from .density import DEFAULT_ESTIMATOR, estimate_degree, is_m_density_point, ladder_table, FINITE, HOLDS
    config = config or DEFAULT_ESTIMATOR
    n = Delta.n
    if mu.smoothness == "C0":
        raise ContractViolation("mu must be C1")
    E = coincidence_set(Delta, mu, window, eps_eq)
    probe = rasterize(E, min(window.sides) / 512, window)
    vacuous = probe.measure() == 0
    dmu = exterior_derivative(mu)
    pts = np.atleast_2d(np.asarray(samples, dtype=float)).reshape(-1, n)
    analytic = max_abs(dmu, pts) if len(pts) else np.zeros(0)
    fd_mu = FormField(n, mu.degree, tuple(Field(n, c.fn, None) for c in mu.coefficients),
                      mu.smoothness, mu.support, mu.fd_step)
    numeric = max_abs(exterior_derivative(fd_mu), pts) if len(pts) else np.zeros(0)
    noise = max(float(np.max(np.abs(analytic - numeric))) if len(pts) else 0.0, 1e-12)
    tol = 10.0 * noise
    rows, bad_i, bad_ii = [], [], []
    for x, d in zip(pts, analytic):
        table = ladder_table(E, x, ladder, q)
        est = estimate_degree(E, x, ladder, q, config, table)
        verdict = is_m_density_point(E, x, n + 1, ladder, q, config, table)
        rows.append(TangencyRow(tuple(x), est.cls, est.exponent, verdict, float(d)))
        if verdict == HOLDS and d > tol:
            bad_i.append(tuple(x))
        if d >= c_big and verdict == HOLDS:
            bad_ii.append(tuple(x))
    ident, stokes = [], []
    if thetas is None:
        thetas = [FormField(n, n - Delta.degree - 1, tuple(constant(n, 1.0) for _ in basis(n, n - Delta.degree - 1)), "C2")]
    psi = bump_field(n, np.zeros(n), 1.0)
    for x in (identity_points if identity_points is not None else pts[:3]):
        for theta in thetas:
            for r in ladder.radii[:3]:
                lhs, I, J, mass = _identity_terms(Delta, mu, theta, psi, x, r, samples_per_axis)
                mass = max(mass, 1e-300)
                ident.append(abs(lhs - I - J) / mass)
                stokes.append(abs(I) / mass)
    return TangencyReport(tuple(rows), tol, noise, c_big, vacuous, tuple(bad_i), tuple(bad_ii),
                          tuple(ident), tuple(stokes), identity_tol)


def cantor_tangency_setup(depth=6, base=4.0, f=None, height=1.0):
    """``n = 2, h = 0``: ``λ = f``, ``Δ = −df`` and ``μ = Δ + g(y_1) dx_2`` with
    ``g = dist(y_1, C)^2`` for a fat Cantor set C, so that the coincidence set
    is ``C × R`` and ``dμ = g'(y_1) dx_1 ∧ dx_2``."""
    from .gallery import FatCantorSet, geometric_fractions
    C = FatCantorSet(geometric_fractions(depth, base), depth)
    n = 2
    f = f if f is not None else Poly(2, {(1, 1): 1.0, (2, 0): 0.5, (0, 3): -0.3})
    lam = FormField(n, 0, (f,), "C2")
    Delta = -exterior_derivative(lam)

    gp = Field(n, lambda p: 2.0 * (p[:, 0] - C.nearest(p[:, 0])), None, "g'")
    g = Field(n, lambda p: C.distance(p[:, 0]) ** 2, (gp, constant(n, 0.0)), "g")
    mu = Delta + FormField.from_dict(n, 1, {(2,): g})
    window = Box((-0.05, -height), (1.05, height))
    return lam, Delta, mu, window, C
