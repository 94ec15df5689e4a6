import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affsurf.affine import (
    AffineMap, affine_image_asa, affine_surface_area, bpn_asa_closed_form, ghsw_candidate,
    isoperimetric_bound, lutwak_candidates, lutwak_functional, petty_ratio, psd_root_inequality,
    random_psd_pair, slab_defect, steiner_asa, valuation_defect,
)
from affsurf.bodies import Ball, Intersection, LpBall, StarBody, cube, ellipsoid, halfspace_body, simplex
from affsurf.errors import (
    CentroidError, NonConvexError, SingularMapError, UnsupportedRepresentationError,
)
from affsurf.grids import SphereGrid, sphere_area
from affsurf.rng import stream


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_bpn_quadrature_matches_closed_form(p):
    res = affine_surface_area(LpBall(p, 2))
    assert res.method == "quadrature"
    assert res.value == pytest.approx(bpn_asa_closed_form(p, 2), rel=1e-4)
    assert res.error_estimate < 1e-4 * res.value


def test_disk_and_sphere():
    assert affine_surface_area(Ball(2)).value == pytest.approx(2 * math.pi, abs=1e-6)
    assert bpn_asa_closed_form(2, 2) == pytest.approx(2 * math.pi, rel=1e-12)
    assert bpn_asa_closed_form(2, 3) == pytest.approx(4 * math.pi, rel=1e-12)
    assert affine_surface_area(Ball(3)).value == pytest.approx(sphere_area(3), rel=1e-6)


def test_polytopes_have_zero_affine_surface_area():
    for P in (cube(2), cube(3), simplex(3)):
        r = affine_surface_area(P)
        assert r.value == 0.0 and r.method == "definitional_zero"


def test_star_body_is_rejected():
    S = StarBody(lambda xi: np.ones(len(xi)), dim=2)
    with pytest.raises(UnsupportedRepresentationError):
        affine_surface_area(S)


@given(seed=st.integers(0, 10_000))
def test_affine_covariance(seed):
    rng = stream(seed, 1)
    M = rng.standard_normal((2, 2))
    d = abs(np.linalg.det(M))
    if d < 1e-3:
        return
    target = rng.uniform(0.2, 5.0)
    M = M * math.sqrt(target / d)
    T = AffineMap(M, rng.standard_normal(2))
    K = LpBall(3, 2)
    a = affine_surface_area(K).value
    res = affine_surface_area(T.apply(K))
    expected = affine_image_asa(a, T)
    # the half-grid error estimate must cover the actual quadrature error
    assert abs(res.value - expected) <= max(2 * res.error_estimate, 1e-6 * expected)
    assert res.value == pytest.approx(expected, rel=1e-2)


def test_singular_map_rejected():
    with pytest.raises(SingularMapError):
        AffineMap.linear([[1.0, 2.0], [2.0, 4.0]])


@pytest.mark.parametrize("K", [LpBall(1.5, 2), LpBall(4, 2), ellipsoid(3, 1), LpBall(3, 3),
                               cube(2), simplex(3)], ids=lambda K: type(K).__name__)
def test_isoperimetric_inequality(K):
    _, ratio = isoperimetric_bound(K)
    assert ratio <= 1 + 1e-3


@pytest.mark.parametrize("E", [Ball(2), ellipsoid(2, 1), ellipsoid(2, 1, 0.5), Ball(3)],
                         ids=["disk", "ellipse", "ellipsoid", "ball3"])
def test_isoperimetric_equality_on_ellipsoids(E):
    assert isoperimetric_bound(E)[1] == pytest.approx(1.0, abs=1e-4)


@given(seed=st.integers(0, 100_000), m=st.integers(1, 3))
def test_psd_determinant_root_inequality(seed, m):
    A, B = random_psd_pair(m, stream(seed, 2))
    lhs, rhs = psd_root_inequality(A, B)
    assert lhs <= rhs + 1e-12 * max(1.0, rhs)


def test_psd_equality_for_equal_matrices():
    A = np.diag([1.0, 2.0])
    lhs, rhs = psd_root_inequality(A, A)
    assert lhs == pytest.approx(rhs)


@pytest.mark.parametrize("E,a,b", [(Ball(2), 0.3, -0.3), (ellipsoid(2, 1), 0.5, -0.5),
                                   (Ball(2), 0.2, 0.2), (ellipsoid(2, 1, 0.5), 0.4, -0.1)])
def test_valuation_property_on_slabs(E, a, b):
    assert abs(slab_defect(E, a, b)) <= 1e-3


def test_valuation_rejects_nonconvex_union():
    K = Ball(2, 0.5, center=[-1.0, 0.0])
    C = Ball(2, 0.5, center=[1.0, 0.0])
    with pytest.raises(NonConvexError):
        valuation_defect(K, C, center=np.zeros(2))


def test_lutwak_functional_bounds():
    assert lutwak_functional(Ball(2), Ball(2)) == pytest.approx(2 * math.pi, abs=1e-9)
    for K in (Ball(2), LpBall(3, 2), cube(2)):
        a = affine_surface_area(K).value
        for L in lutwak_candidates(K, 6, seed=4):
            assert lutwak_functional(K, L) >= a - 1e-3


def test_lutwak_needs_centred_body():
    with pytest.raises(CentroidError):
        lutwak_functional(Ball(2), Ball(2, center=[0.3, 0.0]))


def test_petty_ratio():
    assert petty_ratio(Ball(2)) == pytest.approx(1.0, rel=2e-2)
    assert petty_ratio(ellipsoid(2, 1)) == pytest.approx(1.0, rel=2e-2)
    assert petty_ratio(LpBall(4, 2)) <= 1.0
    assert petty_ratio(cube(2)) == 0.0


def test_petty_ratio_three_dimensional_ball():
    assert petty_ratio(Ball(3)) == pytest.approx(1.0, rel=2e-2)


@pytest.mark.parametrize("K", [ellipsoid(2, 1), LpBall(3, 2), LpBall(4, 2)],
                         ids=["ellipse", "bp3", "bp4"])
def test_steiner_symmetrization_does_not_decrease_asa(K):
    for ang in (0.0, 0.4, 1.1):
        a, s = steiner_asa(K, [math.cos(ang), math.sin(ang)])
        assert a == pytest.approx(affine_surface_area(K).value, rel=1e-4)
        assert s >= a * (1 - 1e-2)


def test_ghsw_candidate_truncates_square():
    C = cube(2)
    G = ghsw_candidate(C, 1.2 / math.sqrt(2))
    g = affine_surface_area(G).value
    assert 0 < g < isoperimetric_bound(C, 0.0)[0]
    assert ghsw_candidate(C, 2.0) is C


def test_intersection_with_halfspace_drops_flat_part():
    # half disk: curved arc of length pi contributes, the diameter does not
    half = Intersection([Ball(2), halfspace_body([0.0, -1.0], 0.0, 2)], center=np.array([0.0, 0.5]))
    assert affine_surface_area(half, SphereGrid.circle(8192, graded=True)).value == pytest.approx(math.pi, rel=1e-3)
