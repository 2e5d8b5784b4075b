import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superdensity.density import HOLDS, RadiusLadder
from superdensity.forms import (Covector, Field, FormField, MultiIndex, Poly, basis, bump_battery,
                                bump_field, box_integral, cantor_tangency_setup, coincidence_set,
                                constant, coordinate, exterior_derivative, form_wedge, integrate_form,
                                max_abs, merge_sign, nondegeneracy_check, pairing_vector,
                                permutation_sign, random_poly_form, sign_table, tangency_experiment,
                                weak_pairing_residual, wedge)
from superdensity.gallery import make_ball
from superdensity.measure_core import Box, ContractViolation, QuadratureSpec


@st.composite
def covectors(draw, n=None, k=None):
    n = n if n is not None else draw(st.integers(1, 7))
    k = k if k is not None else draw(st.integers(0, n))
    c = draw(st.lists(st.floats(-3, 3), min_size=len(basis(n, k)), max_size=len(basis(n, k))))
    return Covector(n, k, np.array(c))


def _tensor(xi):
    """Full antisymmetric tensor of a covector (oracle representation)."""
    T = np.zeros((xi.n,) * xi.k)
    for alpha, c in xi.items():
        for perm in itertools.permutations(range(xi.k)):
            idx = tuple(alpha[p] - 1 for p in perm)
            T[idx] += permutation_sign(perm) * c
    return T


def _oracle_wedge(a, b):
    """``(k+l)!/(k! l!) Alt(a ⊗ b)`` read off at increasing indices."""
    k, l = a.k, b.k
    T = np.multiply.outer(_tensor(a), _tensor(b))
    out = []
    for I in basis(a.n, k + l):
        total = 0.0
        for perm in itertools.permutations(range(k + l)):
            total += permutation_sign(perm) * T[tuple(I[p] - 1 for p in perm)]
        out.append(total / (math.factorial(k) * math.factorial(l)))
    return np.array(out)


# ------------------------------------------------------------ multi-indices and signs

def test_basis_sizes_and_order():
    for n in range(1, 8):
        for k in range(n + 1):
            B = basis(n, k)
            assert len(B) == math.comb(n, k)
            assert list(B) == sorted(B)
    assert basis(3, 4) == ()


def test_multi_index_contracts():
    with pytest.raises(ContractViolation):
        MultiIndex(3, (2, 1))
    with pytest.raises(ContractViolation):
        MultiIndex(3, (1, 4))
    assert MultiIndex(4, (1, 3)).complement().entries == (2, 4)


@given(st.permutations(list(range(1, 8))), st.integers(0, 7))
def test_merge_sign_matches_cycle_parity(perm, cut):
    a, b = tuple(sorted(perm[:cut])), tuple(sorted(perm[cut:]))
    assert merge_sign(a, b) == permutation_sign(a + b)


def test_repeated_index_has_sign_zero():
    assert merge_sign((1, 2), (2, 3)) == 0
    assert permutation_sign((1, 2, 1)) == 0


# ------------------------------------------------------------ wedge

def test_basic_wedges():
    dx1, dx2 = Covector.dx(3, 1), Covector.dx(3, 2)
    assert (dx1 ^ dx2).allclose(Covector.dx(3, 1, 2))
    assert (dx2 ^ dx1).allclose(-Covector.dx(3, 1, 2))
    assert np.all((dx1 ^ dx1).coefficients == 0)


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(covectors(n=n), covectors(n=n))))
def test_wedge_matches_alternating_tensor_oracle(pair):
    a, b = pair
    if a.k + b.k > a.n:
        assert wedge(a, b).coefficients.size == 0
        return
    np.testing.assert_allclose(wedge(a, b).coefficients, _oracle_wedge(a, b), atol=1e-9)


@given(st.integers(1, 7).flatmap(lambda n: st.tuples(covectors(n=n), covectors(n=n))))
def test_graded_antisymmetry(pair):
    a, b = pair
    lhs, rhs = wedge(a, b), wedge(b, a) * (-1) ** (a.k * b.k)
    np.testing.assert_allclose(lhs.coefficients, rhs.coefficients, atol=1e-12)


@given(st.integers(1, 7).flatmap(lambda n: st.tuples(covectors(n=n), covectors(n=n), covectors(n=n))))
def test_associativity(triple):
    a, b, c = triple
    np.testing.assert_allclose(wedge(wedge(a, b), c).coefficients, wedge(a, wedge(b, c)).coefficients,
                               atol=1e-12 * max(1.0, float(np.max(np.abs(wedge(wedge(a, b), c).coefficients),
                                                                  initial=0.0))))


@given(covectors())
def test_nondegeneracy_recovers_coefficients(xi):
    assert nondegeneracy_check(xi)
    np.testing.assert_array_equal(pairing_vector(xi), sign_table(xi.n, xi.k) * xi.coefficients)


def test_sign_table_entries_are_units():
    for n in range(1, 8):
        for k in range(n + 1):
            assert set(np.unique(sign_table(n, k))) <= {-1.0, 1.0}


def test_covector_degree_mismatch():
    with pytest.raises(ContractViolation):
        Covector.dx(3, 1) + Covector.dx(3, 1, 2)


# ------------------------------------------------------------ fields

@given(st.integers(0, 2 ** 32 - 1))
def test_poly_derivative_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    P = Poly.random(3, 4, rng)
    pts = rng.uniform(-1, 1, (20, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-6
        fd = (P(pts + e) - P(pts - e)) / 2e-6
        np.testing.assert_allclose(P.partial(i)(pts), fd, rtol=1e-6, atol=1e-6)


def test_product_rule_gradients_are_lazy_and_correct():
    rng = np.random.default_rng(1)
    f = bump_field(2, (0.1, 0.0), 0.8) * Poly.random(2, 2, rng)
    assert f.analytic
    pts = rng.uniform(-0.5, 0.5, (30, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1e-6
        np.testing.assert_allclose(f.partial(i)(pts), (f(pts + e) - f(pts - e)) / 2e-6, atol=1e-7)


def test_field_without_gradients_uses_finite_differences():
    f = Field(2, lambda p: np.sin(p[:, 0]) * p[:, 1])
    assert not f.analytic
    pts = np.array([[0.3, 2.0]])
    assert f.partial(0)(pts)[0] == pytest.approx(math.cos(0.3) * 2.0, rel=1e-8)


# ------------------------------------------------------------ exterior derivative

@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
def test_d_squared_vanishes(seed, n):
    rng = np.random.default_rng(seed)
    h = int(rng.integers(0, n - 1))
    lam = random_poly_form(n, h, rng)
    pts = rng.uniform(-1, 1, (50, n))
    assert np.max(max_abs(exterior_derivative(exterior_derivative(lam)), pts)) <= 1e-8


@given(st.integers(0, 2 ** 32 - 1))
def test_leibniz_rule(seed):
    rng = np.random.default_rng(seed)
    n = 3
    h, g = int(rng.integers(0, 3)), int(rng.integers(0, 2))
    lam, mu = random_poly_form(n, h, rng), random_poly_form(n, g, rng)
    lhs = exterior_derivative(form_wedge(lam, mu))
    rhs = form_wedge(exterior_derivative(lam), mu) + form_wedge(lam, exterior_derivative(mu)) * (-1.0) ** h
    pts = rng.uniform(-1, 1, (50, n))
    assert np.max(max_abs(lhs - rhs, pts), initial=0.0) <= 1e-8


def test_d_of_coordinate_function():
    x1x2 = FormField(2, 0, (coordinate(2, 0) * coordinate(2, 1),), "C2")
    d = exterior_derivative(x1x2)
    np.testing.assert_allclose(d(np.array([[2.0, 3.0]])), [[3.0, 2.0]])


def test_d_of_c0_form_is_rejected():
    with pytest.raises(ContractViolation):
        exterior_derivative(FormField(2, 0, (constant(2, 1.0),), "C0"))


# ------------------------------------------------------------ integration

def test_box_integral_of_polynomial():
    P = Poly(2, {(2, 0): 1.0, (0, 1): 3.0})
    val = box_integral(P, Box((0.0, 0.0), (1.0, 2.0)), 256)
    # ∫_0^1∫_0^2 x^2 + 3y = 2/3 + 6
    assert val.value == pytest.approx(2 / 3 + 6, rel=1e-5)


def test_integrate_area_form_over_disc():
    vol = FormField(2, 2, (constant(2, 1.0),), "C2")
    assert integrate_form(vol, make_ball((0.0, 0.0), 1.0), samples_per_axis=512).value == pytest.approx(
        math.pi, rel=1e-3)


def test_integrate_form_needs_top_degree():
    with pytest.raises(ContractViolation):
        integrate_form(FormField(2, 1, (constant(2, 1.0), constant(2, 0.0))), make_ball((0, 0), 1))


@pytest.mark.parametrize("h", [0, 1])
def test_weak_pairing_for_smooth_forms(h):
    rng = np.random.default_rng(10 + h)
    lam = random_poly_form(2, h, rng)
    Delta = exterior_derivative(lam) * (-1.0) ** (h + 1)
    for om in bump_battery(2, 1 - h, 4, rng):
        res, scale, _ = weak_pairing_residual(lam, Delta, om)
        assert abs(res) <= 1e-3 * scale


def test_weak_pairing_detects_a_wrong_derivative():
    rng = np.random.default_rng(3)
    lam = random_poly_form(2, 0, rng)
    wrong = exterior_derivative(lam)  # sign flipped relative to the weak condition
    om = bump_battery(2, 1, 1, rng)[0]
    res, scale, _ = weak_pairing_residual(lam, wrong, om)
    assert abs(res) > 0.1 * scale


def test_weak_pairing_contracts():
    rng = np.random.default_rng(0)
    lam = random_poly_form(2, 0, rng)
    Delta = -exterior_derivative(lam)
    with pytest.raises(ContractViolation):
        weak_pairing_residual(lam, Delta, random_poly_form(2, 1, rng))
    with pytest.raises(ContractViolation):
        weak_pairing_residual(lam, lam, bump_battery(2, 1, 1, rng)[0])


# ------------------------------------------------------------ tangency experiment

def test_cantor_setup_coincides_on_the_cantor_strip():
    lam, Delta, mu, window, C = cantor_tangency_setup(depth=5)
    E = coincidence_set(Delta, mu, window)
    on = np.column_stack([C.lo[:4] + 1e-3 * C.piece_length, np.zeros(4)])
    widest = np.argsort(C.lo[1:] - C.hi[:-1])[-4:]
    off = np.column_stack([0.5 * (C.hi[widest] + C.lo[widest + 1]), np.zeros(4)])
    assert E.contains(on).all()
    assert not E.contains(off).any()
    np.testing.assert_allclose(max_abs(exterior_derivative(mu), on), 0.0, atol=1e-12)


def test_tangency_experiment_small_run():
    lam, Delta, mu, window, C = cantor_tangency_setup(depth=5)
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0, 1, 8), rng.uniform(-0.5, 0.5, 8)])
    rep = tangency_experiment(Delta, mu, window, pts, RadiusLadder(2.0 ** -4, 0.5, 8),
                               identity_points=pts[:1], samples_per_axis=128)
    assert not rep.vacuous
    assert rep.passed, rep
    assert all(r.dmu <= rep.tol_dmu for r in rep.rows if r.verdict == HOLDS)


def test_tangency_rejects_c0_mu():
    lam, Delta, mu, window, C = cantor_tangency_setup(depth=3)
    mu0 = FormField(2, 1, mu.coefficients, "C0")
    with pytest.raises(ContractViolation):
        tangency_experiment(Delta, mu0, window, np.zeros((1, 2)), RadiusLadder())
