"""Reusable batteries behind the ``laws`` and ``forms`` subcommands and the acceptance run."""
from __future__ import annotations

import math

import numpy as np

from .density import (FINITE, INFINITE, ZERO, RadiusLadder, degree_law_suite,
                      equivalence_invariance_check, estimate_degree)
from .forms import (Covector, FormField, basis, bump_battery, exterior_derivative,
                    form_wedge, max_abs, nondegeneracy_check, random_poly_form,
                    weak_pairing_residual, wedge)
from .gallery import make_ball, make_cusp, make_half_space, make_rectangle
from .measure_core import Box, ImplicitRegion, QuadratureSpec


# ---------------------------------------------------------------- set laws

def counterexample_battery(q=None, ladder=None):
    """``E1 = (-1, 0)``, ``E2 = (0, 1)`` in R: the union has degree inf at 0 while both pieces have 0."""
    ladder = ladder or RadiusLadder(2.0 ** -4, 0.5, 8)
    E1, E2 = make_ball((-0.5,), 0.5), make_ball((0.5,), 0.5)
    from .measure_core import union
    U = union(E1, E2)
    at0 = [estimate_degree(R, (0.0,), ladder, q) for R in (E1, E2, U)]
    off = [(-0.5,), (0.25,), (0.75,)]
    max_off = [max(estimate_degree(E1, x, ladder, q).order_key(), estimate_degree(E2, x, ladder, q).order_key())
               for x in off]
    union_inf = at0[2].cls == INFINITE
    max_zero = max(at0[0].order_key(), at0[1].order_key()) == 0
    return {"union_infinite": union_inf, "max_zero": max_zero,
            "max_elsewhere_infinite": all(math.isinf(v) for v in max_off),
            "reproduced": union_inf and max_zero and all(math.isinf(v) for v in max_off),
            "estimates": at0}


def random_shape(rng, through_origin=True):
    """A random half-plane, disc, rectangle or cusp (n = 2)."""
    kind = rng.integers(4)
    if kind == 0:
        theta = rng.uniform(0, 2 * np.pi)
        off = 0.0 if through_origin else rng.uniform(-0.3, 0.3)
        return make_half_space((np.cos(theta), np.sin(theta)), off)
    if kind == 1:
        r = rng.uniform(0.3, 1.0)
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        c = d * (r if through_origin else rng.uniform(0, 1.2 * r))
        return make_ball(c, r)
    if kind == 2:
        w = rng.uniform(0.2, 1.0, size=2)
        lo = -rng.uniform(0, 1, size=2) * w
        if through_origin:
            lo[rng.integers(2)] = 0.0
        return make_rectangle(Box(lo, lo + w))
    return make_cusp(rng.uniform(2.5, 5.0))


def half_plane_battery(pairs, ladder, q=None, seed=0, points_per_pair=3):
    """Set laws over random pairs of simple shapes; samples include the origin."""
    rng = np.random.default_rng(seed)
    total = None
    for _ in range(pairs):
        E, F = random_shape(rng), random_shape(rng)
        pts = np.vstack([np.zeros((1, 2)), rng.uniform(-0.5, 0.5, size=(points_per_pair - 1, 2))])
        rep = degree_law_suite(E, F, pts, ladder, q)
        total = rep if total is None else _merge(total, rep)
    return total


def identical_battery(ladder, q=None, seed=0, count=5):
    rng = np.random.default_rng(seed)
    total = None
    for _ in range(count):
        E = random_shape(rng)
        rep = degree_law_suite(E, E, np.vstack([np.zeros((1, 2)), rng.uniform(-0.5, 0.5, size=(2, 2))]),
                               ladder, q, tol=0.0)
        total = rep if total is None else _merge(total, rep)
    return total


def _merge(a, b):
    from .density import LawReport
    return LawReport(a.checked + b.checked, a.skipped + b.skipped,
                     a.intersection_violations + b.intersection_violations,
                     a.union_violations + b.union_violations, a.rows + b.rows)


def null_sets():
    """Null perturbations of the unit disc: a point set, a segment and the circle."""
    pts = np.array([[0.3, 0.1], [-0.2, 0.4], [0.0, -0.6]])

    def finite(p):
        return np.any(np.all(p[:, None, :] == pts[None, :, :], axis=2), axis=1)

    def segment(p):
        return (p[:, 1] == 0.0) & (np.abs(p[:, 0]) <= 1.0)

    def circle(p):
        return np.sum(p * p, axis=1) == 1.0

    box = Box((-1.0, -1.0), (1.0, 1.0))
    return (ImplicitRegion(2, finite, box, "points"), ImplicitRegion(2, segment, box, "segment"),
            ImplicitRegion(2, circle, box, "circle"))


def equivalence_battery(ladder, q=None, samples=None):
    E = make_ball((0.0, 0.0), 1.0)
    samples = samples if samples is not None else np.array(
        [[0.3, 0.1], [0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.6, 0.8]])
    rows, bad = [], []
    for N in null_sets():
        rep = equivalence_invariance_check(E, N, samples, ladder, q, window=Box((-1.5, -1.5), (1.5, 1.5)))
        rows += list(rep.rows)
        bad += list(rep.disagreements)
    from .density import EquivalenceReport
    return EquivalenceReport(tuple(rows), tuple(bad))


# ---------------------------------------------------------------- algebra

def _random_covector(n, k, rng, density=1.0):
    c = rng.normal(size=len(basis(n, k)))
    c[rng.random(c.size) > density] = 0.0
    return Covector(n, k, c)


def algebra_suite(seed=0, trials=50, points=100):
    """Maximal residuals of the algebraic identities, each with its tolerance."""
    rng = np.random.default_rng(seed)
    anti = assoc = 0.0
    nondeg = True
    for _ in range(trials):
        n = int(rng.integers(2, 8))
        k1, k2, k3 = (int(rng.integers(0, n + 1)) for _ in range(3))
        a, b, c = (_random_covector(n, k, rng) for k in (k1, k2, k3))
        ab, ba = wedge(a, b), wedge(b, a)
        if ab.coefficients.size:
            anti = max(anti, float(np.max(np.abs(ab.coefficients - (-1) ** (k1 * k2) * ba.coefficients))))
        left, right = wedge(wedge(a, b), c), wedge(a, wedge(b, c))
        if left.coefficients.size:
            assoc = max(assoc, float(np.max(np.abs(left.coefficients - right.coefficients))))
    for n in range(1, 8):
        for k in range(0, n + 1):
            nondeg &= nondegeneracy_check(_random_covector(n, k, rng, density=0.5))
            nondeg &= nondegeneracy_check(Covector.zero(n, k))
    dd = leib = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 5))
        h = int(rng.integers(0, n - 1))
        lam = random_poly_form(n, h, rng)
        pts = rng.uniform(-1, 1, size=(points, n))
        dd = max(dd, float(np.max(max_abs(exterior_derivative(exterior_derivative(lam)), pts))))
        g = int(rng.integers(0, n - h))
        mu = random_poly_form(n, g, rng)
        lhs = exterior_derivative(form_wedge(lam, mu))
        rhs = form_wedge(exterior_derivative(lam), mu) + form_wedge(lam, exterior_derivative(mu)) * (-1.0) ** h
        leib = max(leib, float(np.max(max_abs(lhs - rhs, pts))))
    return {"antisymmetry": (anti, 1e-12), "associativity": (assoc, 1e-12), "d_squared": (dd, 1e-8),
            "leibniz": (leib, 1e-8), "nondegeneracy": (0.0 if nondeg else 1.0, 0.0)}


def pairing_suite(seed=0, forms=10, bumps=20, samples_per_axis=256):
    """Relative residuals ``|∫Δ∧ω − ∫λ∧dω| / scale`` with ``Δ = (−1)^(h+1) dλ``."""
    rng = np.random.default_rng(seed)
    battery = {h: bump_battery(2, 2 - h - 1, bumps, rng) for h in (0, 1)}
    out = []
    for i in range(forms):
        h = i % 2
        lam = random_poly_form(2, h, rng)
        Delta = exterior_derivative(lam) * (-1.0) ** (h + 1)
        for j, om in enumerate(battery[h]):
            res, scale, _ = weak_pairing_residual(lam, Delta, om, samples_per_axis=samples_per_axis)
            out.append((h, i, j, abs(res) / max(scale, 1e-300)))
    return out
