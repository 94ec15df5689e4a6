"""Generalized second derivatives and Gauss-Kronecker curvature.

Three independent routes to the curvature of a boundary point are provided
and are meant to be checked against each other:

* ``curvature_implicit`` from value, gradient and Hessian of an implicit F,
  in cofactor and bordered-determinant form;
* ``curvature_graph`` from the gradient and Hessian of a local graph chart
  (``graph_chart`` builds one by finite differences);
* ``dupin_curvature`` from rescaled shallow slices (indicatrix of Dupin).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bodies import ConvexBody, SmoothBody, _as_rows, _unit, perp_basis
from .errors import (
    GeometryError,
    NonConvexError,
    NotOnBoundaryError,
    ZeroGradientError,
)
from .grids import SphereGrid

# ---------------------------------------------------------------------------
# One-dimensional convex functions
# ---------------------------------------------------------------------------


@dataclass
class ConvexScalarFunction:
    f: Callable[[float], float]
    lo: float = -math.inf
    hi: float = math.inf
    df: Optional[Callable[[float], float]] = None

    def __call__(self, x):
        return self.f(x)


def midpoint_convexity_violation(fn: ConvexScalarFunction, n_triples: int = 500,
                                 seed: int = 0) -> float:
    """Largest f((a+b)/2) - (f(a)+f(b))/2 over random pairs in the domain."""
    lo = fn.lo if math.isfinite(fn.lo) else -10.0
    hi = fn.hi if math.isfinite(fn.hi) else 10.0
    rng = np.random.default_rng(seed)
    ab = lo + (hi - lo) * rng.random((n_triples, 2))
    worst = -math.inf
    for a, b in ab:
        worst = max(worst, fn(0.5 * (a + b)) - 0.5 * (fn(a) + fn(b)))
    return worst


def kinked_parabola(x):
    """Convex function equal to x^2 at +-1/n (and for |x| >= 1), linear in between.

    Twice differentiable at 0 in the generalized sense with second
    derivative 2, but not twice differentiable there in the classical sense.
    """
    ax = abs(float(x))
    if ax == 0.0:
        return 0.0
    if ax >= 1.0:
        return ax * ax
    inv = 1.0 / ax
    n = math.floor(inv)
    if inv == n:
        return ax * ax
    return (2 * n + 1) / (n * (n + 1)) * ax - 1.0 / (n * (n + 1))


def _one_sided(fn, x, sign, r0, levels):
    fx = fn(x)
    h = r0 * 0.5 ** np.arange(levels)
    D = np.array([(fn(x + sign * hk) - fx) / hk for hk in h]) * sign
    # two Richardson sweeps removing O(h) and O(h^2) terms
    R1 = 2 * D[1:] - D[:-1]
    R2 = (4 * R1[1:] - R1[:-1]) / 3
    # truncation estimate from successive differences plus a round-off bound
    roundoff = 40 * np.finfo(float).eps * (abs(fx) + 1.0) / h[2:]
    err = np.abs(np.diff(R2, prepend=R2[0])) + roundoff
    err[0] = np.inf
    k = int(np.argmin(err))
    return float(R2[k]), D


def subdifferential_1d(fn: ConvexScalarFunction, x: float, r0: float = 1e-2,
                       levels: int = 40, tol: float = 1e-10) -> tuple[float, float]:
    """Interval [d-, d+] of subgradients of a convex function at an interior x."""
    if not (fn.lo < x < fn.hi):
        raise GeometryError("x must be interior to the domain")
    room = min(x - fn.lo, fn.hi - x)
    r0 = min(r0, 0.5 * room)
    d_plus, Dp = _one_sided(fn, x, +1.0, r0, levels)
    d_minus, Dm = _one_sided(fn, x, -1.0, r0, levels)
    fx = fn(x)
    for hk in r0 * 0.5 ** np.arange(levels):
        if fx > 0.5 * (fn(x - hk) + fn(x + hk)) + tol * max(1.0, abs(fx)):
            raise NonConvexError(f"midpoint convexity fails at x={x} with h={hk:g}")
    if d_minus > d_plus + 1e-7:
        raise NonConvexError("left derivative exceeds right derivative")
    return d_minus, max(d_plus, d_minus)


@dataclass
class HessianEstimate:
    matrix: np.ndarray
    residual: float
    radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.matrix = 0.5 * (m + m.T)


def generalized_hessian_1d(fn: ConvexScalarFunction, x0: float, radii=None) -> HessianEstimate:
    """Least-squares second derivative from subgradients at x0 +- r.

    ``theta[k]`` is the largest |df(x) - df(x0) - H (x - x0)| / r_k over the
    probes x = x0 +- r_k; it tends to 0 as r_k -> 0 iff the function is twice
    differentiable at x0 in the generalized sense.
    """
    if radii is None:
        radii = 1e-3 * 0.5 ** np.arange(12)
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    lo, hi = subdifferential_1d(fn, x0)
    g0 = 0.5 * (lo + hi)
    disp, grads = [], []
    for r in radii:
        for x in (x0 - r, x0 + r):
            a, b = subdifferential_1d(fn, x)
            disp += [x - x0, x - x0]
            grads += [a, b]
    d = np.array(disp)
    g = np.array(grads) - g0
    H = float(np.dot(d, g) / np.dot(d, d))
    res = np.abs(g - H * d)
    theta = res.reshape(len(radii), 4).max(axis=1) / radii
    return HessianEstimate(np.array([[max(H, 0.0)]]), float(res.max()), radii, theta)


# ---------------------------------------------------------------------------
# Curvature formulas
# ---------------------------------------------------------------------------


def curvature_graph(gradient, hessian) -> float:
    """Gauss-Kronecker curvature of the graph of a convex function.

    For a graph over R^m: det(d^2 f) / (1 + |df|^2)^((m + 2) / 2).
    """
    g = np.atleast_1d(np.asarray(gradient, dtype=float))
    H = np.atleast_2d(np.asarray(hessian, dtype=float))
    m = H.shape[0]
    if H.shape != (m, m) or g.shape != (m,):
        raise GeometryError("gradient/hessian shapes do not match")
    if np.max(np.abs(H - H.T)) > 1e-8 * max(1.0, np.max(np.abs(H))):
        raise GeometryError("hessian must be symmetric")
    det = float(np.linalg.det(H))
    if det < -1e-8:
        raise NonConvexError("negative hessian determinant")
    return max(det, 0.0) / (1 + float(g @ g)) ** ((m + 2) / 2)


def cofactor(H: np.ndarray) -> np.ndarray:
    """Cofactor matrices of a stack (..., n, n), via minors (works for singular H)."""
    H = np.asarray(H, dtype=float)
    n = H.shape[-1]
    out = np.empty_like(H)
    if n == 1:
        out[...] = 1.0
        return out
    idx = np.arange(n)
    for k in range(n):
        rows = idx[idx != k]
        for l in range(n):
            cols = idx[idx != l]
            minor = H[..., rows[:, None], cols[None, :]]
            out[..., k, l] = (-1) ** (k + l) * np.linalg.det(minor)
    return out


def implicit_curvature_forms(grad, hess):
    """(cofactor form, bordered-determinant form) for stacks of gradients/Hessians."""
    g = np.atleast_2d(np.asarray(grad, dtype=float))
    H = np.asarray(hess, dtype=float)
    if H.ndim == 2:
        H = H[None]
    n = g.shape[1]
    norm = np.linalg.norm(g, axis=1)
    cof = np.einsum("mi,mij,mj->m", g, cofactor(H), g)
    border = np.zeros((len(g), n + 1, n + 1))
    border[:, :n, :n] = H
    border[:, :n, n] = g
    border[:, n, :n] = g
    bdet = np.linalg.det(border)
    scale = norm ** (n + 1)
    return np.abs(cof) / scale, np.abs(bdet) / scale


def curvature_implicit(B: SmoothBody, x, tol: float = 1e-9, return_both: bool = False):
    """Curvature of the boundary of {F <= 0} at boundary point(s) x.

    |grad F^T cof(Hess F) grad F| / |grad F|^(n+1) for a body in R^n.
    """
    x, single = _as_rows(x, B.dim)
    val, grad, hess = B.F(x)
    if np.any(np.abs(val) > tol):
        raise NotOnBoundaryError(f"F(x) = {val[np.argmax(np.abs(val))]:.3g} is not zero")
    if np.any(B.exceptional(x)) or np.any(np.linalg.norm(grad, axis=1) < 1e-14):
        raise ZeroGradientError("point lies on the declared exception set")
    k1, k2 = implicit_curvature_forms(grad, hess)
    if return_both:
        return (k1[0], k2[0]) if single else (k1, k2)
    return k1[0] if single else k1


def bpn_curvature(p: float, x) -> float:
    """Closed-form curvature of the l_p unit sphere at x (all coordinates nonzero)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if np.any(x == 0):
        raise ZeroGradientError("all coordinates must be nonzero")
    ax = np.abs(x)
    if np.any(np.abs(np.sum(ax ** p, axis=-1) - 1) > 1e-9):
        raise NotOnBoundaryError("point is not on the l_p unit sphere")
    num = (p - 1) ** (n - 1) * np.prod(ax ** (p - 2), axis=-1)
    den = np.sum(ax ** (2 * p - 2), axis=-1) ** ((n + 1) / 2)
    return num / den


def principal_curvatures(B: SmoothBody, x) -> np.ndarray:
    """Principal curvatures at a single boundary point (eigenvalues of the shape operator)."""
    x = np.asarray(x, dtype=float)
    _, g, H = B.F(x[None])
    g, H = g[0], H[0]
    N = g / np.linalg.norm(g)
    T = perp_basis(N)
    return np.sort(np.linalg.eigvalsh(T @ H @ T.T / np.linalg.norm(g)))


def graph_chart(K: ConvexBody, x0, h: float = 1e-4):
    """Gradient and Hessian of a local convex graph chart of the boundary at x0.

    The chart is taken over the coordinate hyperplane most transverse to the
    normal; values come from chord root-finding, derivatives from central
    differences.  Independent of the implicit curvature formula.
    """
    x0 = np.asarray(x0, dtype=float)
    n = K.dim
    N = K.normals(x0)
    k = int(np.argmax(np.abs(N)))
    sgn = 1.0 if N[k] > 0 else -1.0
    others = [i for i in range(n) if i != k]
    e_k = np.zeros(n)
    e_k[k] = 1.0
    m = n - 1

    def f(offsets):
        base = np.repeat(x0[None, :], len(offsets), axis=0)
        base[:, others] += offsets
        lo, hi = K.chord(base, e_k)
        top = hi if sgn > 0 else lo
        coord = base[:, k] + top
        return -sgn * coord

    E = np.eye(m) * h
    probes = [np.zeros(m)]
    for i in range(m):
        probes += [E[i], -E[i]]
    for i in range(m):
        for j in range(i + 1, m):
            probes += [E[i] + E[j], E[i] - E[j], -E[i] + E[j], -E[i] - E[j]]
    vals = f(np.array(probes))
    f0 = vals[0]
    grad = np.empty(m)
    hess = np.empty((m, m))
    for i in range(m):
        fp, fm = vals[1 + 2 * i], vals[2 + 2 * i]
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / h ** 2
    pos = 1 + 2 * m
    for i in range(m):
        for j in range(i + 1, m):
            pp, pm, mp, mm = vals[pos:pos + 4]
            hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h * h)
            pos += 4
    return grad, hess


# ---------------------------------------------------------------------------
# Indicatrix of Dupin
# ---------------------------------------------------------------------------

CYLINDER_AXIS2 = 1e6
FIT_RESIDUAL = 1e-3
GROWTH = 1.1


@dataclass
class DupinSlice:
    delta: float
    points: np.ndarray
    semi_axes: np.ndarray
    residual: float
    cylinder: bool

    @property
    def curvature(self) -> float:
        if self.cylinder:
            return 0.0
        return float(np.prod(self.semi_axes) ** -2)


@dataclass
class DupinResult:
    curvature: float
    cylinder: bool
    trace: list[DupinSlice]


def _fit_centered_quadric(P: np.ndarray):
    """Fit (p-c)^T A (p-c) = 1; returns (A, c, residual relative to diameter)."""
    m = P.shape[1]
    if m == 1:
        a, b = P[:, 0].min(), P[:, 0].max()
        r = 0.5 * (b - a)
        return np.array([[1.0 / r ** 2]]), np.array([0.5 * (a + b)]), 0.0
    iu = np.triu_indices(m)
    quad = np.stack([P[:, i] * P[:, j] * (1.0 if i == j else 2.0) for i, j in zip(*iu)], axis=1)
    M = np.hstack([quad, P])
    coef, *_ = np.linalg.lstsq(M, np.ones(len(P)), rcond=None)
    A = np.zeros((m, m))
    A[iu] = coef[: len(iu[0])]
    A = A + A.T - np.diag(np.diag(A))
    bvec = coef[len(iu[0]):]
    try:
        c = -0.5 * np.linalg.solve(A, bvec)
    except np.linalg.LinAlgError:
        return A, np.zeros(m), math.inf
    k = 1.0 + c @ A @ c
    A = A / k
    Q = P - c
    qa = np.einsum("ij,jk,ik->i", Q, A, Q)
    if np.any(qa <= 0):
        return A, c, math.inf
    geo = np.abs(np.sqrt(qa) - 1.0) * np.linalg.norm(Q, axis=1) / np.sqrt(qa)
    diam = np.max(np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1))
    return A, c, float(geo.max() / diam)


def dupin_slice(K: ConvexBody, x0, normal, delta: float, n_dirs: int = 64) -> DupinSlice:
    x0 = np.asarray(x0, dtype=float)
    N = _unit(np.asarray(normal, dtype=float))
    T = perp_basis(N)
    m = T.shape[0]
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif m == 2:
        phi = 2 * np.pi * np.arange(n_dirs) / n_dirs
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
    else:
        dirs = SphereGrid.random(m, n_dirs * m, seed=1).directions
    c0 = x0 - delta * N
    if not K.contains(c0[None, :])[0]:
        raise GeometryError("slice center lies outside the body; delta too large")
    tau = K.ray_exit(np.broadcast_to(c0, (len(dirs), K.dim)), dirs @ T)
    P = dirs * (tau / math.sqrt(2 * delta))[:, None]
    A, c, resid = _fit_centered_quadric(P)
    eig = np.linalg.eigvalsh(A)
    if not np.all(eig > 0) or not math.isfinite(resid):
        return DupinSlice(delta, P, np.full(m, math.inf), resid, True)
    axes = 1.0 / np.sqrt(eig)
    cylinder = bool(axes.max() ** 2 > CYLINDER_AXIS2 or resid > FIT_RESIDUAL)
    return DupinSlice(delta, P, np.sort(axes), resid, cylinder)


def dupin_curvature(K: ConvexBody, x0, deltas=None, normal=None, n_dirs: int = 64) -> DupinResult:
    """Curvature (product of r_i^-2) from shallow slices at decreasing depths.

    The value at the smallest depth is returned together with the trace.  An
    elliptic-cylinder verdict (curvature 0) is given when the largest squared
    semi-axis exceeds 1e6, the ellipsoid fit residual exceeds 1e-3 of the
    slice diameter, or the rescaled slices grow by more than 10% per step
    over the last three depths.
    """
    if deltas is None:
        deltas = [10.0 ** -k for k in range(2, 9)]
    x0 = np.asarray(x0, dtype=float)
    N = K.normals(x0) if normal is None else normal
    trace = [dupin_slice(K, x0, N, d, n_dirs) for d in sorted(deltas, reverse=True)]
    last = trace[-1]
    if not last.cylinder and len(trace) >= 3:
        # a rescaled slice that keeps growing has no limiting ellipsoid
        size = [float(np.prod(s.semi_axes)) for s in trace[-3:]]
        if size[1] > GROWTH * size[0] and size[2] > GROWTH * size[1]:
            return DupinResult(0.0, True, trace)
    return DupinResult(last.curvature, last.cylinder, trace)
