import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affsurf.bodies import (
    Ball, HPolytope, LpBall, VPolytope, cross_polytope, cube, ellipsoid, regular_polygon, simplex,
)
from affsurf.core import (
    hausdorff_distance, mixed_volume_v1, mixed_volume_v1_fd, moments, polar_polytope,
    projection_body_support, radial, steiner_symmetrize, support, surface_measure, symdiff_volume,
    volume_by_quadrature,
)
from affsurf.errors import (
    EmptyBodyError, GeometryError, OriginNotInteriorError, UnboundedBodyError,
)
from affsurf.grids import SphereGrid, ball_volume, sphere_area

unit2 = st.floats(0, 2 * math.pi).map(lambda a: np.array([math.cos(a), math.sin(a)]))


def unit3():
    return st.tuples(st.floats(-1, 1), st.floats(0, 2 * math.pi)).map(
        lambda zp: np.array([math.sqrt(1 - zp[0] ** 2) * math.cos(zp[1]),
                             math.sqrt(1 - zp[0] ** 2) * math.sin(zp[1]), zp[0]]))


BODIES = [Ball(2), cube(2), LpBall(3, 2), ellipsoid(2, 1), regular_polygon(7), simplex(2)]


def test_support_of_cube_and_ball():
    u = np.array([0.6, 0.8])
    assert support(cube(2), u) == pytest.approx(1.4)
    assert support(Ball(2), u) == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        support(cube(2), np.array([1.0, 1.0]))


def test_radial_of_cube():
    xi = np.array([1.0, 1.0]) / math.sqrt(2)
    assert radial(cube(2), xi) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("K", BODIES, ids=lambda K: type(K).__name__)
@given(u=unit2, v=unit2, a=st.floats(0.1, 3), b=st.floats(0.1, 3))
def test_support_is_sublinear(K, u, v, a, b):
    w = a * u + b * v
    if np.linalg.norm(w) < 1e-6:
        return
    hw = np.linalg.norm(w) * K.support(w / np.linalg.norm(w))
    assert hw <= a * K.support(u) + b * K.support(v) + 1e-9


def test_polar_of_cube_is_cross_polytope():
    P = polar_polytope(cube(3))
    Q = cross_polytope(3)
    assert hausdorff_distance(P, Q) < 1e-12


def test_polar_needs_interior_origin():
    with pytest.raises(OriginNotInteriorError):
        polar_polytope(VPolytope([[0, 0], [1, 0], [0, 1]]))


@given(seed=st.integers(0, 10_000))
def test_bipolar_recovers_polytope(seed):
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 8))
    rad = rng.uniform(0.5, 2.0, 8)
    P = VPolytope(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))
    if np.any(P.b <= 1e-3):
        return
    PP = polar_polytope(polar_polytope(P))
    assert hausdorff_distance(P, PP) < 1e-9


def test_hpolytope_errors():
    with pytest.raises(UnboundedBodyError):
        HPolytope([([1.0, 0.0], 1.0), ([0.0, 1.0], 1.0), ([-1.0, 0.0], 1.0)])
    with pytest.raises(EmptyBodyError):
        HPolytope([([1.0, 0.0], -1.0), ([-1.0, 0.0], -1.0), ([0.0, 1.0], 1.0), ([0.0, -1.0], 1.0)])


def test_volumes_exact_and_quadrature():
    assert cube(3).volume() == pytest.approx(8.0)
    assert simplex(3).volume() == pytest.approx(1 / 6)
    assert volume_by_quadrature(Ball(3)) == pytest.approx(ball_volume(3), rel=1e-6)
    assert volume_by_quadrature(ellipsoid(2, 1)) == pytest.approx(2 * math.pi, rel=1e-9)
    lp = LpBall(1.5, 2)
    exact = 4 * math.gamma(1 + 1 / 1.5) ** 2 / math.gamma(1 + 2 / 1.5)
    assert lp.volume() == pytest.approx(exact, rel=1e-9)
    assert volume_by_quadrature(lp) == pytest.approx(exact, rel=1e-6)


def test_monte_carlo_moments_cover_truth():
    m = moments(Ball(2), samples=200_000, seed=3)
    assert abs(m.volume - math.pi) <= 4 * m.stderr
    assert not m.exact
    e = moments(cube(2))
    assert e.exact and e.volume == 4.0


def test_distances():
    assert hausdorff_distance(Ball(2), Ball(2, 2.0)) == pytest.approx(1.0)
    v, s = symdiff_volume(Ball(2), Ball(2, 2.0), samples=200_000, seed=1)
    assert abs(v - 3 * math.pi) <= 4 * s


def test_surface_measure_atoms():
    atoms = surface_measure(cube(3))
    assert len(atoms.masses) == 6
    assert np.allclose(atoms.masses, 4.0)
    tri = surface_measure(simplex(2))
    assert sorted(tri.masses) == pytest.approx([1.0, 1.0, math.sqrt(2)])
    # closedness: the area measure has barycentre 0
    for P in (cube(3), simplex(3), regular_polygon(5)):
        a = surface_measure(P)
        assert np.allclose(a.masses @ a.normals, 0.0, atol=1e-12)


@pytest.mark.parametrize("K", [cube(2), simplex(2), regular_polygon(6), cube(3)],
                         ids=["square", "triangle", "hexagon", "cube3"])
def test_mixed_volume_of_body_with_itself_is_volume(K):
    assert mixed_volume_v1(K, K) == pytest.approx(K.volume(), rel=1e-12)


def test_mixed_volume_paths_agree():
    assert mixed_volume_v1(cube(2), Ball(2)) == pytest.approx(4.0)
    assert mixed_volume_v1_fd(cube(2), regular_polygon(3)) == pytest.approx(
        mixed_volume_v1(cube(2), regular_polygon(3)), rel=1e-8)


def test_projection_body_support_values():
    assert projection_body_support(cube(2), np.array([1, 1]) / math.sqrt(2)) == pytest.approx(2 * math.sqrt(2))
    assert projection_body_support(Ball(3), np.array([0.0, 0.0, 1.0])) == pytest.approx(math.pi, rel=1e-4)
    assert projection_body_support(cube(3), np.array([1.0, 0.0, 0.0])) == pytest.approx(4.0)


def test_steiner_preserves_volume_and_is_symmetric():
    T = VPolytope([[0, 0], [2, 0], [0, 2]])
    S = steiner_symmetrize(T, [0.0, 1.0])
    assert S.volume() == pytest.approx(2.0)
    v = S.vertices
    assert hausdorff_distance(S, VPolytope(v * [1, -1])) < 1e-12


def test_steiner_rounds_monotone_towards_ball():
    rng = np.random.default_rng(5)
    K = VPolytope([[-1.5, -0.3], [1.2, -0.8], [0.9, 1.1], [-0.4, 1.4]])
    vol = K.volume()
    r = math.sqrt(vol / math.pi)
    prev = math.inf
    for _ in range(50):
        a = rng.uniform(0, math.pi)
        K = steiner_symmetrize(K, [math.cos(a), math.sin(a)])
        assert K.volume() == pytest.approx(vol, rel=1e-9)
        d = hausdorff_distance(K, Ball(2, r))
        # non-increasing up to the chord-sampling resolution of the symmetral
        assert d <= prev + 1e-5
        prev = d


def test_sphere_grids_integrate_constants():
    assert SphereGrid.circle(512).integrate(np.ones(512)) == pytest.approx(sphere_area(2))
    g = SphereGrid.fibonacci(2000)
    assert g.integrate(np.ones(len(g))) == pytest.approx(sphere_area(3))
    assert g.integrate(g.directions[:, 2] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-3)
