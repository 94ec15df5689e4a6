import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from affsurf.bodies import Ball, LpBall, cube, ellipsoid
from affsurf.curvature import (
    ConvexScalarFunction, bpn_curvature, cofactor, curvature_graph, curvature_implicit,
    dupin_curvature, generalized_hessian_1d, graph_chart, implicit_curvature_forms,
    kinked_parabola, midpoint_convexity_violation, principal_curvatures, subdifferential_1d,
)
from affsurf.errors import NonConvexError, NotOnBoundaryError, ZeroGradientError

angle = st.floats(0.05, math.pi / 2 - 0.05)


def ellipse_point(a, b, t):
    return np.array([a * math.cos(t), b * math.sin(t)])


def ellipse_curvature(a, b, t):
    return a * b / (a * a * math.sin(t) ** 2 + b * b * math.cos(t) ** 2) ** 1.5


def test_sphere_curvature_is_one():
    x = np.array([0.6, 0.0, 0.8])
    assert curvature_implicit(Ball(3), x) == pytest.approx(1.0, abs=1e-9)
    d = dupin_curvature(Ball(3), x, deltas=[1e-4]).curvature
    assert d == pytest.approx(1.0, rel=5e-3)
    assert curvature_implicit(Ball(2, 2.0), np.array([2.0, 0.0])) == pytest.approx(0.5)


@given(t=angle)
def test_ellipse_implicit_matches_parametric(t):
    x = ellipse_point(2, 1, t)
    assert curvature_implicit(ellipsoid(2, 1), x, tol=1e-9) == pytest.approx(ellipse_curvature(2, 1, t), rel=1e-9)


@given(t=angle)
def test_cofactor_and_bordered_forms_agree(t):
    K = LpBall(3, 2)
    xi = np.array([math.cos(t), math.sin(t)])
    x = K.radial(xi[None])[0] * xi
    k1, k2 = curvature_implicit(K, x, tol=1e-8, return_both=True)
    assert k1 == pytest.approx(k2, rel=1e-9)


def test_cofactor_is_adjugate():
    A = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    assert np.allclose(cofactor(A[None])[0], np.linalg.det(A) * np.linalg.inv(A))


@given(p=st.sampled_from([2.0, 3.0, 4.0]), t=angle)
def test_bpn_closed_form_matches_implicit(p, t):
    K = LpBall(p, 2)
    xi = np.array([math.cos(t), math.sin(t)])
    x = K.radial(xi[None])[0] * xi
    assert bpn_curvature(p, x) == pytest.approx(curvature_implicit(K, x, tol=1e-8), rel=1e-8)


def test_principal_curvatures_of_ellipsoid_multiply_to_curvature():
    K = ellipsoid(2, 1.5, 1)
    x = np.array([1.2, 0.6, math.sqrt(1 - 0.36 - 0.16)])
    kappa = principal_curvatures(K, x)
    assert np.all(kappa > 0)
    assert np.prod(kappa) == pytest.approx(curvature_implicit(K, x), rel=1e-9)
    # apex of the z-axis: principal curvatures c/a^2 and c/b^2
    k = principal_curvatures(K, np.array([0.0, 0.0, 1.0]))
    assert k == pytest.approx(sorted([1 / 4, 1 / 2.25]))


@pytest.mark.parametrize("K,x", [
    (ellipsoid(2, 1), [math.sqrt(2), math.sqrt(0.5)]),
    (LpBall(2, 2), [0.6, 0.8]),
    (LpBall(3, 2), [0.5 ** (1 / 3)] * 2),
    (LpBall(4, 2), [2 ** -0.25] * 2),
    (ellipsoid(2, 1.5, 1), [1.2, 0.6, math.sqrt(1 - 0.36 - 0.16)]),
    (LpBall(4, 3), [3 ** -0.25] * 3),
], ids=["ellipse", "bp2", "bp3", "bp4", "ellipsoid3", "bp4-3d"])
def test_three_curvature_methods_agree(K, x):
    x = np.asarray(x, dtype=float)
    ref = curvature_implicit(K, x, tol=1e-8)
    assert curvature_graph(*graph_chart(K, x)) == pytest.approx(ref, rel=1e-2)
    assert dupin_curvature(K, x, deltas=[1e-3, 1e-4, 1e-5]).curvature == pytest.approx(ref, rel=1e-2)


def test_graph_formula_on_paraboloid():
    # f = (x^2 + 2 y^2)/2 at the origin: curvature = det Hess = 2
    assert curvature_graph(np.zeros(2), np.diag([1.0, 2.0])) == pytest.approx(2.0)
    g = np.array([1.0])
    assert curvature_graph(g, np.array([[2.0]])) == pytest.approx(2.0 / 2 ** 1.5)


def test_flat_point_of_l4_ball_is_detected_as_cylinder():
    res = dupin_curvature(LpBall(4, 2), np.array([0.0, 1.0]), deltas=[1e-2, 1e-4, 1e-6])
    assert res.cylinder and res.curvature == 0.0
    assert curvature_implicit(LpBall(4, 2), np.array([0.0, 1.0])) == 0.0


def test_polytope_face_has_zero_dupin_curvature():
    res = dupin_curvature(cube(2), np.array([1.0, 0.3]))
    assert res.cylinder and res.curvature == 0.0
    assert dupin_curvature(cube(3), np.array([0.2, -0.4, 1.0])).curvature == 0.0


def test_curvature_errors():
    with pytest.raises(NotOnBoundaryError):
        curvature_implicit(Ball(2), np.array([0.5, 0.0]))
    with pytest.raises(ZeroGradientError):
        curvature_implicit(LpBall(1.5, 2), np.array([1.0, 0.0]))


def test_forms_vectorize():
    g = np.array([[1.0, 0.0], [0.0, 2.0]])
    H = np.stack([2 * np.eye(2)] * 2)
    k1, k2 = implicit_curvature_forms(g, H)
    assert np.allclose(k1, k2)
    assert k1 == pytest.approx([2.0, 1.0])


def test_kinked_parabola_subdifferential():
    f = ConvexScalarFunction(kinked_parabola)
    assert midpoint_convexity_violation(f) <= 1e-12
    lo, hi = subdifferential_1d(f, 0.5)
    assert (lo, hi) == pytest.approx((5 / 6, 3 / 2), abs=1e-6)
    lo, hi = subdifferential_1d(f, 0.75)
    assert lo == pytest.approx(1.5, abs=1e-6) and hi == pytest.approx(1.5, abs=1e-6)


def test_generalized_second_derivative():
    sq = generalized_hessian_1d(ConvexScalarFunction(lambda x: x * x), 0.3)
    assert sq.matrix[0, 0] == pytest.approx(2.0, abs=1e-6)
    assert sq.theta[-1] < 1e-5
    kp = generalized_hessian_1d(ConvexScalarFunction(kinked_parabola), 0.0)
    assert kp.matrix[0, 0] == pytest.approx(2.0, rel=1e-4)
    assert kp.theta[-1] < 1e-3
    ab = generalized_hessian_1d(ConvexScalarFunction(abs), 0.0)
    assert ab.theta[-1] > ab.theta[0] > 1


def test_nonconvex_function_rejected():
    with pytest.raises(NonConvexError):
        subdifferential_1d(ConvexScalarFunction(lambda x: -x * x), 0.1)


def test_graph_curvature_oracles():
    assert curvature_graph(np.zeros(1), np.eye(1)) == pytest.approx(1.0)
    # hemisphere f = 1 - sqrt(1 - x^2) at x = 0.5
    x = 0.5
    f1 = x / math.sqrt(1 - x * x)
    f2 = (1 - x * x) ** -1.5
    assert curvature_graph(np.array([f1]), np.array([[f2]])) == pytest.approx(1.0, rel=1e-12)
    H = np.diag([1.0, 3.0])
    assert curvature_graph(np.zeros(2), 2 * H) == pytest.approx(4 * curvature_graph(np.zeros(2), H))


def test_graph_curvature_rejects_negative_determinant():
    with pytest.raises(NonConvexError):
        curvature_graph(np.zeros(2), np.diag([1.0, -1.0]))
