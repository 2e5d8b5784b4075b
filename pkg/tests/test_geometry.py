import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from superdensity import intervals as iv
from superdensity.geometry import (ball_intersection_volume, ball_volume, cap_volume, disc_box_area,
                                   unit_ball_volume)


def test_unit_ball_volumes_closed_forms():
    np.testing.assert_allclose([unit_ball_volume(n) for n in (1, 2, 3, 4)],
                               [2.0, math.pi, 4 * math.pi / 3, math.pi ** 2 / 2], rtol=1e-14)


@given(st.integers(1, 6), st.floats(0.01, 10.0))
def test_ball_volume_scales_like_r_to_the_n(n, r):
    assert ball_volume(n, r) == pytest.approx(unit_ball_volume(n) * r ** n, rel=1e-12)


@given(st.floats(-0.99, 0.99))
def test_cap_volume_matches_chord_quadrature_in_the_plane(d):
    # area of {x1 > d} in the unit disc
    ref, _ = integrate.quad(lambda x: 2 * math.sqrt(max(1 - x * x, 0.0)), d, 1.0, epsabs=1e-13)
    assert cap_volume(2, 1.0, d) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_cap_volume_halves_the_ball():
    for n in (1, 2, 3, 5):
        assert cap_volume(n, 2.0, 0.0) == pytest.approx(ball_volume(n, 2.0) / 2, rel=1e-12)


def test_ball_intersection_volume_matches_grid_count():
    c2, r2 = np.array([0.7, 0.2]), 0.6
    k = 2000
    axis = -1 + (np.arange(k) + 0.5) * (2.0 / k)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    inside = (X ** 2 + Y ** 2 < 1) & ((X - c2[0]) ** 2 + (Y - c2[1]) ** 2 < r2 ** 2)
    grid = inside.sum() * (2.0 / k) ** 2
    got = float(ball_intersection_volume(2, np.zeros(2), 1.0, c2, r2)[0])
    assert got == pytest.approx(grid, rel=2e-3)


def test_ball_intersection_volume_limits():
    assert float(ball_intersection_volume(2, np.zeros(2), 1.0, np.array([3.0, 0.0]), 1.0)[0]) == 0.0
    inner = float(ball_intersection_volume(2, np.zeros(2), 1.0, np.array([0.1, 0.0]), 0.2)[0])
    assert inner == pytest.approx(math.pi * 0.04, rel=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1.0))
def test_disc_box_area_never_exceeds_either_set(cx, cy, r):
    area = disc_box_area(np.array([cx, cy]), r, np.array([0.0, 0.0]), np.array([0.5, 0.7]))
    assert -1e-12 <= area <= min(math.pi * r * r, 0.35) + 1e-12


def test_disc_box_area_against_grid():
    k = 2000
    axis = (np.arange(k) + 0.5) / k
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    grid = np.count_nonzero((X - 0.3) ** 2 + (Y - 0.9) ** 2 < 0.4 ** 2) / k ** 2
    area = disc_box_area(np.array([0.3, 0.9]), 0.4, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert area == pytest.approx(grid, rel=2e-3)


def test_interval_algebra():
    a = iv.normalize(np.array([[0.0, 2.0]]), np.array([[1.0, 3.0]]))
    b = iv.single(np.array([0.5]), np.array([2.5]))
    np.testing.assert_allclose(iv.total_length(iv.intersect(a, b)), [1.0])
    np.testing.assert_allclose(iv.total_length(iv.union(a, b)), [3.0])
    np.testing.assert_allclose(iv.total_length(iv.affine(a, 2.0, np.array([1.0]))), [4.0])


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 3)), min_size=1, max_size=5))
def test_interval_union_length_is_subadditive(pieces):
    lo = np.array([[p[0] for p in pieces]])
    hi = np.array([[p[0] + p[1] for p in pieces]])
    merged = iv.normalize(lo, hi)
    assert iv.total_length(merged)[0] <= sum(p[1] for p in pieces) + 1e-9
    assert iv.total_length(merged)[0] >= max(p[1] for p in pieces) - 1e-9
