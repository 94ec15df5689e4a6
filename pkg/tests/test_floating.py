import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affsurf.bodies import Ball, LpBall, VPolytope, cube, ellipsoid, unit_ball_cap
from affsurf.errors import ContainmentError, EmptyBodyError, NotOnBoundaryError, ParameterRangeError
from affsurf.floating import (
    asa_via_floating, boundary_sample_smooth, cap_depths, cap_height, curvature_rolling_gap,
    floating_body, floating_constant, random_containing_polygon, rolling_radius, sw1_profile,
)
from affsurf.grids import ball_volume


def test_cap_height_of_half_disk_is_zero():
    assert cap_height(Ball(2), np.array([1.0, 0.0]), math.pi / 2) == pytest.approx(0.0, abs=1e-8)


def test_cap_height_of_square():
    # cutting area 0.4 off the side x = 1 of [-1, 1]^2 leaves the line x = 0.8
    assert cap_height(cube(2), np.array([1.0, 0.0]), 0.4) == pytest.approx(0.8, rel=1e-6)


@given(t=st.floats(1e-6, 0.5))
def test_cap_depth_matches_segment_area(t):
    w = cap_depths(Ball(2), np.array([[0.0, 1.0]]), t)[0]
    assert unit_ball_cap(2, w)[0] == pytest.approx(t, rel=2e-4)


def test_cap_depth_rejects_large_t():
    with pytest.raises(ParameterRangeError):
        cap_depths(Ball(2), np.array([[1.0, 0.0]]), 2.0)


def test_floating_constant_in_the_plane():
    assert floating_constant(2) == pytest.approx(2 * (2 / 3) ** (2 / 3))
    assert floating_constant(3) == pytest.approx(2 * (ball_volume(2) / 4) ** 0.5)


def test_floating_body_is_inside_and_shrinks():
    K = ellipsoid(2, 1)
    big, small = floating_body(K, 1e-2), floating_body(K, 1e-1)
    assert 0 < big.deficit < small.deficit
    assert np.all(K.contains(big.body.vertices, tol=1e-9))


def test_floating_body_empty_for_large_t():
    with pytest.raises((EmptyBodyError, ParameterRangeError)):
        floating_body(cube(2), 2.0)


@pytest.mark.parametrize("K,ref", [(Ball(2), 2 * math.pi),
                                   (ellipsoid(2, 1), 2 * math.pi * 2 ** (1 / 3))],
                         ids=["disk", "ellipse"])
def test_floating_estimate_converges(K, ref):
    ests = asa_via_floating(K, [1e-3, 1e-4, 1e-6])
    errs = [abs(e.estimate / ref - 1) for e in ests]
    assert errs[-1] < 3e-2
    assert ests[-1].refined == pytest.approx(ref, rel=1e-3)


def test_square_normalized_deficit_vanishes():
    vals = [floating_body(cube(2), t).normalized for t in (1e-3, 1e-5, 1e-7, 1e-9)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.05 * vals[0]


def test_rolling_radius_of_cube():
    C = cube(2)
    assert rolling_radius(C, np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert rolling_radius(C, np.array([1.0, 0.5])) == pytest.approx(0.5)
    assert rolling_radius(C, np.array([1.0, 1.0])) == 0.0
    with pytest.raises(NotOnBoundaryError):
        rolling_radius(C, np.array([0.5, 0.0]))


def test_rolling_radius_of_ellipse_is_bounded_by_curvature_radii():
    K = ellipsoid(2, 1)
    # smallest radius of curvature b^2/a = 0.5 at the vertex (2, 0), largest a^2/b = 4
    assert rolling_radius(K, np.array([2.0, 0.0])) == pytest.approx(0.5, rel=1e-4)
    r = rolling_radius(K, np.array([0.0, 1.0]))
    assert 0.5 - 1e-6 <= r <= 1.0 + 1e-6


@pytest.mark.parametrize("K", [ellipsoid(2, 1), LpBall(3, 2), ellipsoid(2, 1.5, 1)],
                         ids=["ellipse", "bp3", "ellipsoid3"])
def test_curvature_bounds_rolling_radius(K):
    x = boundary_sample_smooth(K, 12, seed=3)
    if isinstance(K, LpBall):
        x = x[np.all(np.abs(x) > 1e-3, axis=1)]
    assert np.all(curvature_rolling_gap(K, x) >= -1e-6)


def test_cube_profile_equality_case():
    prof = sw1_profile(cube(2), samples=100_000, seed=0)
    z = (prof.measure - 8 * (1 - prof.t)) / np.where(prof.stderr > 0, prof.stderr, 1.0)
    assert np.all(np.abs(z) <= 3)
    assert prof.surface_area == pytest.approx(8.0)


@pytest.mark.parametrize("K", [Ball(2), cube(2), random_containing_polygon(11), Ball(3), cube(3)],
                         ids=["disk", "square", "polygon", "ball3", "cube3"])
def test_profile_inequality_holds(K):
    prof = sw1_profile(K, samples=50_000, seed=2)
    assert prof.holds.all()


def test_profile_requires_containing_the_ball():
    with pytest.raises(ContainmentError):
        sw1_profile(VPolytope([[0, 0], [1, 0], [0, 1]]), samples=100)


def test_profile_deterministic():
    a = sw1_profile(random_containing_polygon(4), samples=20_000, seed=9)
    b = sw1_profile(random_containing_polygon(4), samples=20_000, seed=9)
    assert np.array_equal(a.measure, b.measure)
