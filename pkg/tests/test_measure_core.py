import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superdensity.gallery import make_ball, make_cusp, make_half_space, make_rectangle
from superdensity.measure_core import (Ball, Box, ContractViolation, GridRegion, ImplicitRegion,
                                       QuadratureSpec, complement, dilate, grid_measure, integrate,
                                       intersect, rasterize, residual_measure, symmetric_difference,
                                       translate, union)

# Frozen from scripts/derive_oracles.py (4096^2 midpoint count and scipy quad,
# neither of which touches the package).
CUSP_RESIDUAL_R01 = {2.5: 0.00486704846144503, 3.0: 0.0013267550017155975,
                     4.0: 0.00010000000000000003, 6.0: 6.666666666666669e-07}
CUSP_GRID_4096_R01 = {2.5: 0.004867019653320313, 3.0: 0.0013266849517822267}

coord = st.floats(-0.8, 0.8)
radius = st.floats(0.01, 0.5)


def _disc_at(c, r):
    return ImplicitRegion(2, lambda p: np.sum((p - c) ** 2, axis=1) < r * r,
                          Box(np.asarray(c) - r, np.asarray(c) + r), "plain disc")


# ------------------------------------------------------------ contracts

def test_box_rejects_inverted_bounds():
    with pytest.raises(ContractViolation):
        Box((1.0, 0.0), (0.0, 1.0))


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ContractViolation):
        Ball((0.0, 0.0), 0.0)


def test_dimension_mismatch_is_a_contract_violation():
    with pytest.raises(ContractViolation):
        residual_measure(make_ball((0.0, 0.0), 1.0), Ball((0.0,), 0.1))


def test_quadrature_spec_validation():
    with pytest.raises(ContractViolation):
        QuadratureSpec(samples_per_axis=1)
    with pytest.raises(ContractViolation):
        QuadratureSpec(mode="sobol")


# ------------------------------------------------------------ oracles

def test_half_plane_residual_is_half_the_ball():
    E = make_half_space((0.0, 1.0), 0.0)
    for q in (QuadratureSpec(), QuadratureSpec(128, 2).generic()):
        m = residual_measure(E, Ball((0.0, 0.0), 0.25), q)
        assert m.value == pytest.approx(math.pi * 0.25 ** 2 / 2, rel=1e-3)


@pytest.mark.parametrize("m", sorted(CUSP_RESIDUAL_R01))
def test_cusp_residual_matches_independent_oracle(m):
    got = residual_measure(make_cusp(m), Ball((0.0, 0.0), 0.1))
    assert got.value == pytest.approx(CUSP_RESIDUAL_R01[m], rel=1e-4)


@pytest.mark.parametrize("m", sorted(CUSP_GRID_4096_R01))
def test_cusp_residual_matches_package_free_grid_count(m):
    got = residual_measure(make_cusp(m), Ball((0.0, 0.0), 0.1))
    assert got.value == pytest.approx(CUSP_GRID_4096_R01[m], rel=1e-3)


@given(coord, coord, radius)
def test_quadrature_tiers_agree_on_discs(x, y, r):
    """Hook, line sections and the bare lattice estimate the same quantity."""
    E = make_ball((0.2, -0.1), 0.6)
    b = Ball((x, y), r)
    hook = residual_measure(E, b).value
    no_hook = ImplicitRegion(2, E.membership, E.bbox, "sections only", E.sections)
    sections = residual_measure(no_hook, b).value
    lattice = residual_measure(E, b, QuadratureSpec(128, 1).generic()).value
    vol = math.pi * r * r
    assert sections == pytest.approx(hook, abs=1e-4 * vol)
    assert lattice == pytest.approx(hook, abs=3e-3 * vol)


# ------------------------------------------------------------ invariants

@given(coord, coord, radius)
def test_residual_is_bounded_by_ball_volume(x, y, r):
    m = residual_measure(make_cusp(3.0), Ball((x, y), r))
    assert 0.0 <= m.value <= math.pi * r * r * (1 + 1e-12)


@given(coord, coord, radius, st.floats(0.05, 0.5))
def test_monotone_in_the_set(x, y, r, s):
    small, big = make_ball((0.0, 0.0), s), make_ball((0.0, 0.0), s + 0.2)
    b = Ball((x, y), r)
    assert residual_measure(big, b).value <= residual_measure(small, b).value + 1e-12


@given(coord, coord, st.floats(0.01, 0.2), st.floats(0.0, 0.3))
def test_monotone_in_the_radius(x, y, r, dr):
    E = make_cusp(4.0)
    assert residual_measure(E, Ball((x, y), r)).value <= residual_measure(E, Ball((x, y), r + dr)).value + 1e-12


@given(coord, coord, radius)
def test_additivity_over_a_disjoint_split(x, y, r):
    """L(b \\ (A ∪ B)) = L(b \\ A) + L(b \\ B) − L(b) for disjoint A, B."""
    A = make_half_space((1.0, 0.0), 0.1)
    B = complement(make_half_space((1.0, 0.0), 0.1), Box.cube(2))
    b = Ball((x, y), r)
    whole = residual_measure(union(A, B), b).value
    parts = residual_measure(A, b).value + residual_measure(B, b).value - b.volume
    assert whole == pytest.approx(parts, abs=1e-9)
    assert residual_measure(intersect(A, B), b).value == pytest.approx(b.volume, rel=1e-9)


@given(coord, coord, st.floats(0.05, 0.3), st.floats(0.25, 4.0))
def test_scaling_under_dilation(x, y, r, s):
    """Blow-up by s scales residuals by s^-n."""
    E = make_cusp(3.0)
    D = dilate(E, (0.0, 0.0), s)
    direct = residual_measure(E, Ball((s * x, s * y), s * r)).value
    blown = residual_measure(D, Ball((x, y), r)).value
    assert blown * s ** 2 == pytest.approx(direct, rel=1e-6, abs=1e-12)


@given(coord, coord, radius, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_translation_invariance(x, y, r, vx, vy):
    E = make_rectangle(Box((-0.3, -0.2), (0.4, 0.5)))
    T = translate(E, (vx, vy))
    a = residual_measure(E, Ball((x, y), r)).value
    b = residual_measure(T, Ball((x + vx, y + vy), r)).value
    assert b == pytest.approx(a, rel=1e-6, abs=1e-10)


def test_symmetric_difference_with_itself_is_empty():
    E = make_ball((0.0, 0.0), 0.5)
    D = symmetric_difference(E, E)
    assert not D.contains(np.random.default_rng(0).uniform(-1, 1, (1000, 2))).any()


def test_integrate_constant_weight_equals_residual():
    E = make_half_space((0.0, 1.0), 0.0)
    b = Ball((0.1, 0.05), 0.2)
    w = integrate(E, b, lambda p: np.full(len(p), 2.0))
    assert w.value == pytest.approx(2 * residual_measure(E, b).value, rel=1e-6)


def test_stratified_mode_is_deterministic_per_seed():
    E = _disc_at(np.array([0.1, 0.0]), 0.3)
    b0 = Ball((0.35, 0.0), 0.2)
    q = QuadratureSpec(32, 1, "stratified", seed=7)
    a = residual_measure(E, b0, q)
    b = residual_measure(E, b0, q)
    c = residual_measure(E, b0, QuadratureSpec(32, 1, "stratified", seed=8))
    assert a == b
    assert a.value != c.value


# ------------------------------------------------------------ grids

def test_grid_measure_is_exact():
    mask = np.zeros((8, 8), dtype=bool)
    mask[:3, :5] = True
    G = GridRegion((0.0, 0.0), (0.125, 0.125), mask)
    assert G.measure_exact() == Fraction(15, 64)
    assert grid_measure(G) == 15 / 64
    assert G.complement().measure_exact() == Fraction(49, 64)


def test_grid_set_algebra_requires_matching_extents():
    a = GridRegion((0.0,), (0.5,), np.array([True, False]))
    b = GridRegion((0.0,), (0.25,), np.array([True, False]))
    with pytest.raises(ContractViolation):
        a.union(b)


@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_grid_bytes_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(v) for v in rng.integers(1, 9, size=n))
    G = GridRegion(tuple(rng.normal(size=n)), tuple(rng.uniform(0.1, 1, size=n)), rng.random(shape) < 0.5)
    H = GridRegion.from_bytes(G.to_bytes())
    assert H.origin == G.origin and H.spacing == G.spacing
    np.testing.assert_array_equal(H.mask, G.mask)


def test_grid_save_and_load(tmp_path):
    G = rasterize(make_ball((0.0, 0.0), 1.0), 1 / 64, Box((-1, -1), (1, 1)))
    G.save(tmp_path / "disc.grid")
    H = GridRegion.load(tmp_path / "disc.grid")
    np.testing.assert_array_equal(H.mask, G.mask)


def test_grid_header_layout():
    G = GridRegion((1.0,), (0.5,), np.array([True, False, True]))
    data = G.to_bytes()
    assert data[:8] == b"GRIDRGN1"
    assert int.from_bytes(data[8:16], "little") == 1
    assert data[-1] == 0b10100000


def test_rasterized_disc_area_converges():
    areas = [rasterize(make_ball((0.0, 0.0), 1.0), h, Box((-1, -1), (1, 1))).measure()
             for h in (1 / 32, 1 / 128, 1 / 512)]
    errs = [abs(a - math.pi) for a in areas]
    assert errs[-1] < 1e-3 and errs[-1] < errs[0]


def test_grid_to_region_membership():
    G = rasterize(make_rectangle(Box((0.0, 0.0), (0.5, 1.0))), 0.25, Box((0, 0), (1, 1)))
    R = G.to_region()
    np.testing.assert_array_equal(R.contains([[0.1, 0.1], [0.9, 0.1], [2.0, 0.0]]), [True, False, False])
