"""Representations of convex and star bodies.

Every body exposes the same small protocol used by the rest of the package:
``support``, ``contains``, ``ray_exit``, ``radial``, ``chord``, ``volume`` and,
where it is cheap to do exactly, ``cap`` (volume and section area of the cap
cut off at a given depth below a supporting hyperplane).

Polytopes are handled exactly in dimensions 2 and 3 through qhull.  Smooth
bodies are given implicitly as ``{F <= 0}`` with ``F`` returning value,
gradient and Hessian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import betainc, roots_legendre

from .errors import (
    DimensionUnsupportedError,
    EmptyBodyError,
    GeometryError,
    OriginNotInteriorError,
    UnboundedBodyError,
    UnsupportedRepresentationError,
)
from .grids import SphereGrid, ball_volume

DEDUP_TOL = 1e-9
_BISECT_STEPS = 64


def _as_rows(x, dim=None) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if dim is not None and a.shape[1] != dim:
        raise GeometryError(f"expected points of dimension {dim}, got {a.shape[1]}")
    return a, single


def _unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def perp2(u: np.ndarray) -> np.ndarray:
    """Rotate 2-vectors by +90 degrees."""
    u = np.asarray(u, dtype=float)
    return np.stack([-u[..., 1], u[..., 0]], axis=-1)


@dataclass(frozen=True)
class Halfspace:
    """The set {x : <x, normal> <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        length = np.linalg.norm(nrm)
        if length == 0:
            raise GeometryError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", nrm / length)
        object.__setattr__(self, "offset", float(self.offset) / length)


@dataclass
class BoundaryPoint:
    """A boundary location with its outward unit normal (and optional curvature)."""

    x: np.ndarray
    normal: np.ndarray
    curvature: Optional[float] = None


class ConvexBody:
    """Common interface; subclasses override what they can do exactly."""

    dim: int
    center: np.ndarray
    is_polytope = False
    is_smooth = False
    convex = True

    # -- support -----------------------------------------------------------
    def support(self, u):
        raise NotImplementedError

    def width(self, u):
        return self.support(u) + self.support(-np.asarray(u, dtype=float))

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dim)
        return -np.asarray(self.support(-eye)), np.asarray(self.support(eye))

    def diameter_bound(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    # -- membership & rays ------------------------------------------------
    def contains(self, x, tol: float = 0.0):
        raise NotImplementedError

    def ray_exit(self, points, vecs):
        """Largest lam >= 0 with points + lam * vecs in the body (points interior)."""
        raise NotImplementedError

    def radial(self, xi, center=None):
        """Radial function about ``center`` (default: the body's own center)."""
        c = self.center if center is None else np.asarray(center, dtype=float)
        if not np.all(self.contains(c[None, :], tol=-1e-12)):
            raise OriginNotInteriorError("radial center is not interior to the body")
        xi, single = _as_rows(xi, self.dim)
        r = self.ray_exit(np.broadcast_to(c, xi.shape), _unit(xi))
        return r[0] if single else r

    def chord(self, base, u):
        """Parameters (s_min, s_max) of the chord {base + s u} ∩ K; NaN if empty."""
        raise NotImplementedError

    def boundary_points(self, grid: SphereGrid, center=None) -> np.ndarray:
        c = self.center if center is None else np.asarray(center, dtype=float)
        rho = self.radial(grid.directions, c)
        return c + rho[:, None] * grid.directions

    def normals(self, x):
        raise NotImplementedError

    # -- measures -----------------------------------------------------------
    def volume(self) -> float:
        grid = SphereGrid.default(self.dim)
        rho = self.radial(grid.directions)
        return grid.integrate(rho ** self.dim) / self.dim

    def cap(self, xi, depth):
        """Volume and section area of {x in K : <x, xi> >= h_K(xi) - depth}."""
        raise UnsupportedRepresentationError(f"{type(self).__name__} has no cap routine")


# ---------------------------------------------------------------------------
# Polytopes
# ---------------------------------------------------------------------------


def _merge_facets(eqs: np.ndarray, tol: float = 1e-7):
    """Group qhull simplex equations by (normal, offset). Returns (A, b, labels)."""
    A = eqs[:, :-1]
    b = -eqs[:, -1]
    key = np.column_stack([A, b])
    pairs = cKDTree(key).query_pairs(tol, p=np.inf, output_type="ndarray")
    m = len(key)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, comp = connected_components(graph, directed=False)
    # relabel components in order of first appearance
    _, first, labels = np.unique(comp, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    labels = rank[labels]
    groups = first[order]
    return A[groups], b[groups], labels


def chebyshev_center(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball in {A x <= b} (rows of A unit)."""
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 3:
        raise UnboundedBodyError("halfspace system is unbounded")
    if not res.success:
        raise EmptyBodyError("halfspace system is infeasible")
    return res.x[:n], float(res.x[-1])


class Polytope(ConvexBody):
    """Full-dimensional polytope with both V- and H-representations (n <= 3)."""

    is_polytope = True

    def __init__(self, vertices: np.ndarray, A: np.ndarray, b: np.ndarray):
        self.vertices = vertices
        self.A = A
        self.b = b
        self.dim = vertices.shape[1]
        self.center = vertices.mean(axis=0)
        self._hull = None

    # constructors ----------------------------------------------------------
    @staticmethod
    def _from_points(points: np.ndarray):
        n = points.shape[1]
        if n < 2:
            raise DimensionUnsupportedError("polytopes need dimension >= 2")
        if n > 3:
            raise DimensionUnsupportedError("exact polytope geometry is limited to n <= 3")
        try:
            hull = ConvexHull(points)
        except QhullError as exc:
            raise GeometryError("polytope is not full-dimensional") from exc
        verts = points[hull.vertices]
        A, b, _ = _merge_facets(hull.equations)
        return verts, A, b, hull

    @property
    def hull(self) -> ConvexHull:
        if self._hull is None:
            self._hull = ConvexHull(self.vertices)
        return self._hull

    @property
    def halfspaces(self) -> list[Halfspace]:
        return [Halfspace(a, c) for a, c in zip(self.A, self.b)]

    # protocol -------------------------------------------------------------
    def support(self, u):
        u = np.asarray(u, dtype=float)
        return np.max(u @ self.vertices.T, axis=-1)

    def support_point(self, u):
        u, single = _as_rows(u, self.dim)
        idx = np.argmax(u @ self.vertices.T, axis=1)
        pts = self.vertices[idx]
        return pts[0] if single else pts

    def contains(self, x, tol: float = 1e-12):
        x, single = _as_rows(x, self.dim)
        ok = np.all(x @ self.A.T <= self.b + tol, axis=1)
        return ok[0] if single else ok

    def ray_exit(self, points, vecs):
        p, _ = _as_rows(points, self.dim)
        v, _ = _as_rows(vecs, self.dim)
        slack = self.b[None, :] - p @ self.A.T
        rate = v @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(rate > 1e-300, slack / rate, np.inf)
        return np.min(lam, axis=1)

    def chord(self, base, u):
        y, _ = _as_rows(base, self.dim)
        u = np.broadcast_to(np.asarray(u, dtype=float), y.shape)
        rate = u @ self.A.T
        slack = self.b[None, :] - y @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            q = slack / rate
        hi = np.min(np.where(rate > 1e-14, q, np.inf), axis=1)
        lo = np.max(np.where(rate < -1e-14, q, -np.inf), axis=1)
        parallel_out = np.any((np.abs(rate) <= 1e-14) & (slack < -1e-12), axis=1)
        empty = (lo > hi) | parallel_out
        lo = np.where(empty, np.nan, lo)
        hi = np.where(empty, np.nan, hi)
        return lo, hi

    def active_facets(self, x, tol: float = 1e-9) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.nonzero(np.abs(self.A @ x - self.b) <= tol)[0]

    def normals(self, x):
        x, single = _as_rows(x, self.dim)
        idx = np.argmax(x @ self.A.T - self.b, axis=1)
        nrm = self.A[idx]
        return nrm[0] if single else nrm

    def volume(self) -> float:
        return float(self.hull.volume)

    def centroid(self) -> np.ndarray:
        if self.dim == 2:
            v = self.vertices[self.hull.vertices]  # counter-clockwise order
            x, y = v[:, 0], v[:, 1]
            xn, yn = np.roll(x, -1), np.roll(y, -1)
            cr = x * yn - xn * y
            area = cr.sum() / 2
            return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * area)
        o = self.center
        tot = 0.0
        acc = np.zeros(self.dim)
        for simplex in self.hull.simplices:
            pts = np.vstack([o, self.vertices[simplex]])
            vol = abs(np.linalg.det(pts[1:] - o)) / math.factorial(self.dim)
            tot += vol
            acc += vol * pts.mean(axis=0)
        return acc / tot

    # exact caps -------------------------------------------------------------
    def cap(self, xi, depth):
        xi, _ = _as_rows(xi, self.dim)
        depth = np.broadcast_to(np.asarray(depth, dtype=float), (xi.shape[0],))
        if self.dim == 2:
            return self._cap2(xi, depth)
        return self._cap3(xi, depth)

    def _cap2(self, xi, depth):
        v = self.vertices[self.hull.vertices]  # CCW
        w = np.roll(v, -1, axis=0)
        h = np.max(xi @ v.T, axis=1)
        # signed height above the cutting line, per vertex
        da = xi @ v.T - h[:, None] + depth[:, None]
        db = np.roll(da, -1, axis=1)
        ina, inb = da >= 0, db >= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(ina != inb, da / (da - db), 0.0)
        cross_pt = v[None, :, :] + lam[..., None] * (w - v)[None, :, :]
        start = np.where(ina[..., None], v[None], cross_pt)
        end = np.where(inb[..., None], w[None], cross_pt)
        keep = ina | inb
        cr = start[..., 0] * end[..., 1] - start[..., 1] * end[..., 0]
        area = 0.5 * np.sum(np.where(keep, cr, 0.0), axis=1)
        # closing segment from exit point back to entry point
        exit_mask = ina & ~inb
        entry_mask = ~ina & inb
        has = exit_mask.any(axis=1) & entry_mask.any(axis=1)
        ex = cross_pt[np.arange(len(xi)), np.argmax(exit_mask, axis=1)]
        en = cross_pt[np.arange(len(xi)), np.argmax(entry_mask, axis=1)]
        close = 0.5 * (ex[:, 0] * en[:, 1] - ex[:, 1] * en[:, 0])
        area = area + np.where(has, close, 0.0)
        section = np.where(has, np.linalg.norm(ex - en, axis=1), 0.0)
        full = np.all(ina, axis=1)
        area = np.where(full, self.volume(), area)
        return area, section

    def _cap3(self, xi, depth):
        V = self.vertices
        vols = np.empty(len(xi))
        secs = np.empty(len(xi))
        pairs = np.array([(i, j) for i in range(len(V)) for j in range(i + 1, len(V))])
        for k, (u, d) in enumerate(zip(xi, depth)):
            level = V @ u - np.max(V @ u) + d
            inside = V[level >= 0]
            la, lb = level[pairs[:, 0]], level[pairs[:, 1]]
            cross = (la >= 0) != (lb >= 0)
            t = la[cross] / (la[cross] - lb[cross])
            pa, pb = V[pairs[cross, 0]], V[pairs[cross, 1]]
            cut = pa + t[:, None] * (pb - pa)
            pts = np.vstack([inside, cut])
            try:
                vols[k] = ConvexHull(pts).volume
            except (QhullError, ValueError):
                vols[k] = 0.0
            if len(cut) >= 3:
                e1 = perp_basis(u)
                try:
                    secs[k] = ConvexHull(cut @ e1.T).volume
                except (QhullError, ValueError):
                    secs[k] = 0.0
            else:
                secs[k] = 0.0
        return vols, secs


def perp_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``u``."""
    u = _unit(u)
    n = u.shape[0]
    m = np.eye(n) - np.outer(u, u)
    q, r = np.linalg.qr(np.column_stack([u, m]))
    return q[:, 1:n].T


class VPolytope(Polytope):
    """Convex hull of a vertex list."""

    def __init__(self, vertices):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise GeometryError("vertices must be a nonempty (N, n) array")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("vertex coordinates must be finite")
        verts, A, b, hull = self._from_points(pts)
        super().__init__(verts, A, b)
        self._hull = None


class HPolytope(Polytope):
    """Bounded intersection of halfspaces with nonempty interior."""

    def __init__(self, halfspaces=None, A=None, b=None):
        if halfspaces is not None:
            hs = [h if isinstance(h, Halfspace) else Halfspace(*h) for h in halfspaces]
            if not hs:
                raise GeometryError("need at least one halfspace")
            A = np.array([h.normal for h in hs])
            b = np.array([h.offset for h in hs])
        else:
            A = np.asarray(A, dtype=float)
            b = np.asarray(b, dtype=float)
            norms = np.linalg.norm(A, axis=1)
            A, b = A / norms[:, None], b / norms
        n = A.shape[1]
        if n > 3:
            raise DimensionUnsupportedError("exact polytope geometry is limited to n <= 3")
        c, r = chebyshev_center(A, b)
        if r <= 1e-12:
            raise EmptyBodyError("polytope has empty interior")
        with np.errstate(divide="ignore", invalid="ignore"):
            hsi = HalfspaceIntersection(np.column_stack([A, -b]), c)
        pts = hsi.intersections
        if not np.all(np.isfinite(pts)):
            raise UnboundedBodyError("halfspace system is unbounded")
        verts, A2, b2, _ = self._from_points(pts)
        # deduplicate vertices produced by degenerate intersections
        drop = {max(i, j) for i, j in cKDTree(verts).query_pairs(DEDUP_TOL, p=np.inf)}
        keep = np.array([i for i in range(len(verts)) if i not in drop])
        super().__init__(verts[keep], A2, b2)
        self.input_A, self.input_b = A, b
        self.chebyshev = (c, r)
        self.center = c


def cube(n: int, r: float = 1.0) -> VPolytope:
    corners = np.array(np.meshgrid(*[[-r, r]] * n, indexing="ij")).reshape(n, -1).T
    return VPolytope(corners)


def simplex(n: int) -> VPolytope:
    """Standard simplex conv{0, e_1, ..., e_n}."""
    return VPolytope(np.vstack([np.zeros(n), np.eye(n)]))


def cross_polytope(n: int) -> VPolytope:
    return VPolytope(np.vstack([np.eye(n), -np.eye(n)]))


def regular_polygon(m: int, radius: float = 1.0, phase: float = 0.0) -> VPolytope:
    t = phase + 2 * np.pi * np.arange(m) / m
    return VPolytope(radius * np.column_stack([np.cos(t), np.sin(t)]))


# ---------------------------------------------------------------------------
# Smooth bodies
# ---------------------------------------------------------------------------

_GL_T, _GL_W = roots_legendre(24)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


class SmoothBody(ConvexBody):
    """Body {F <= 0} for a convex F.

    Subclasses implement ``F`` (value, gradient, Hessian for an (m, n) array)
    and ``value``.  ``exceptional`` marks the declared measure-zero set where
    the gradient vanishes or F is not twice differentiable.
    """

    is_smooth = True

    def __init__(self, dim: int, center=None, symmetric: bool = False):
        self.dim = dim
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.symmetric = symmetric

    def F(self, x):
        raise NotImplementedError

    def value(self, x):
        return self.F(x)[0]

    def exceptional(self, x):
        x, _ = _as_rows(x, self.dim)
        return np.zeros(len(x), dtype=bool)

    def contains(self, x, tol: float = 0.0):
        x, single = _as_rows(x, self.dim)
        ok = self.value(x) <= tol
        return ok[0] if single else ok

    def normals(self, x):
        x, single = _as_rows(x, self.dim)
        g = self.F(x)[1]
        nrm = g / np.linalg.norm(g, axis=1, keepdims=True)
        return nrm[0] if single else nrm

    def support_point(self, u):
        raise NotImplementedError

    def support(self, u):
        u = np.asarray(u, dtype=float)
        x = self.support_point(u)
        return np.sum(x * u, axis=-1)

    # generic root finding ------------------------------------------------
    def ray_exit(self, points, vecs):
        p, _ = _as_rows(points, self.dim)
        v, _ = _as_rows(vecs, self.dim)
        p = np.broadcast_to(p, v.shape)
        speed = np.linalg.norm(v, axis=1)
        lo = np.zeros(len(v))
        hi = (self.diameter_bound() + np.linalg.norm(p - self.center, axis=1)) / speed
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            inside = self.value(p + mid[:, None] * v) <= 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def chord(self, base, u):
        y, _ = _as_rows(base, self.dim)
        u = np.broadcast_to(np.asarray(u, dtype=float), y.shape)
        m = len(y)
        R = self.diameter_bound() + np.linalg.norm(y - self.center, axis=1)
        inside = self.value(y) <= 0
        s0 = np.zeros(m)
        if not np.all(inside):
            # golden-section minimisation of F along the line (F convex)
            a, b = -R.copy(), R.copy()
            g = (math.sqrt(5) - 1) / 2
            c1, c2 = b - g * (b - a), a + g * (b - a)
            f1 = self.value(y + c1[:, None] * u)
            f2 = self.value(y + c2[:, None] * u)
            for _ in range(80):
                left = f1 < f2
                b = np.where(left, c2, b)
                a = np.where(left, a, c1)
                c2n = np.where(left, c1, a + g * (b - a))
                c1n = np.where(left, b - g * (b - a), c2)
                c1, c2 = c1n, c2n
                f1 = self.value(y + c1[:, None] * u)
                f2 = self.value(y + c2[:, None] * u)
            smin = 0.5 * (a + b)
            s0 = np.where(inside, 0.0, smin)
        start = y + s0[:, None] * u
        ok = self.value(start) <= 0
        up = self.ray_exit(start, u)
        down = self.ray_exit(start, -u)
        lo = np.where(ok, s0 - down, np.nan)
        hi = np.where(ok, s0 + up, np.nan)
        return lo, hi

    def cap(self, xi, depth):
        """Generic planar cap via chord quadrature (n = 2 only)."""
        if self.dim != 2:
            raise UnsupportedRepresentationError("generic smooth caps are implemented for n = 2")
        xi, _ = _as_rows(xi, 2)
        depth = np.broadcast_to(np.asarray(depth, dtype=float), (xi.shape[0],))
        top = self.support_point(xi)
        t = np.broadcast_to(perp2(xi), xi.shape)
        k = len(xi)
        # s = depth * tau^2 removes the square-root behaviour at the tip
        s = depth[:, None] * _GL_T[None, :] ** 2
        base = top[:, None, :] - s[..., None] * xi[:, None, :]
        lo, hi = self.chord(base.reshape(-1, 2), np.repeat(t, len(_GL_T), axis=0))
        L = np.nan_to_num(hi - lo).reshape(k, -1)
        vol = 2 * depth * np.sum(_GL_W * _GL_T * L, axis=1)
        lo, hi = self.chord(top - depth[:, None] * xi, t)
        return vol, np.nan_to_num(hi - lo)

    def transform(self, T, b=None) -> "AffineImage":
        return AffineImage(self, T, b)


class Ball(SmoothBody):
    """Euclidean ball of radius ``r`` centred at ``center``; F = |x-c|^2 - r^2."""

    def __init__(self, dim: int, r: float = 1.0, center=None):
        super().__init__(dim, center, symmetric=True)
        self.r = float(r)

    def F(self, x):
        x, _ = _as_rows(x, self.dim)
        d = x - self.center
        val = np.sum(d * d, axis=1) - self.r ** 2
        grad = 2 * d
        hess = np.broadcast_to(2 * np.eye(self.dim), (len(x), self.dim, self.dim))
        return val, grad, hess

    def value(self, x):
        x, _ = _as_rows(x, self.dim)
        d = x - self.center
        return np.sum(d * d, axis=1) - self.r ** 2

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return u @ self.center + self.r * np.linalg.norm(u, axis=-1)

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.center + self.r * _unit(u)

    def ray_exit(self, points, vecs):
        p, _ = _as_rows(points, self.dim)
        v, _ = _as_rows(vecs, self.dim)
        d = p - self.center
        a = np.sum(v * v, axis=1)
        bb = np.sum(d * v, axis=1)
        c = np.sum(d * d, axis=1) - self.r ** 2
        disc = np.sqrt(np.maximum(bb * bb - a * c, 0.0))
        # stable root of a lam^2 + 2 bb lam + c = 0 with lam >= 0 (c <= 0)
        return np.where(bb >= 0, -c / (bb + disc + 1e-300), (disc - bb) / a)

    def chord(self, base, u):
        y, _ = _as_rows(base, self.dim)
        u = np.broadcast_to(np.asarray(u, dtype=float), y.shape)
        d = y - self.center
        a = np.sum(u * u, axis=1)
        bb = np.sum(d * u, axis=1)
        c = np.sum(d * d, axis=1) - self.r ** 2
        disc = bb * bb - a * c
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        return (-bb - sq) / a, (-bb + sq) / a

    def volume(self) -> float:
        return ball_volume(self.dim) * self.r ** self.dim

    def cap(self, xi, depth):
        xi, _ = _as_rows(xi, self.dim)
        delta = np.asarray(depth, dtype=float) / self.r
        vol, sec = unit_ball_cap(self.dim, delta)
        return vol * self.r ** self.dim, sec * self.r ** (self.dim - 1)


def _x_minus_sin(x):
    """x - sin(x) without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = xs * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72 * (1 - x2 / 110))))
    return np.where(small, series, x - np.sin(x))


def unit_ball_cap(n: int, delta):
    """Volume and section area of the cap of height ``delta`` of the unit ball."""
    delta = np.clip(np.asarray(delta, dtype=float), 0.0, 2.0)
    if n == 2:
        alpha = 2 * np.arcsin(np.sqrt(np.minimum(delta, 2.0) / 2))  # half angle
        vol = 0.5 * _x_minus_sin(2 * alpha)
        sec = 2 * np.sqrt(delta * (2 - delta))
        return vol, sec
    if n == 3:
        return np.pi * delta ** 2 * (3 - delta) / 3, np.pi * delta * (2 - delta)
    x = delta * (2 - delta)
    half = 0.5 * ball_volume(n) * betainc((n + 1) / 2, 0.5, np.minimum(x, 1.0))
    vol = np.where(delta <= 1, half, ball_volume(n) - half)
    sec = ball_volume(n - 1) * x ** ((n - 1) / 2)
    return vol, sec


class LpBall(SmoothBody):
    """Unit ball of l_p^n, F = sum |x_i|^p - 1 (p > 1).

    For p < 2 the Hessian blows up on the coordinate hyperplanes; those
    points form the declared exception set.
    """

    def __init__(self, p: float, dim: int):
        if p <= 1:
            raise GeometryError("l_p ball needs p > 1")
        super().__init__(dim, symmetric=True)
        self.p = float(p)
        self.q = self.p / (self.p - 1)

    def F(self, x):
        x, _ = _as_rows(x, self.dim)
        p = self.p
        ax = np.abs(x)
        val = np.sum(ax ** p, axis=1) - 1
        grad = p * np.sign(x) * ax ** (p - 1)
        with np.errstate(divide="ignore"):
            diag = p * (p - 1) * ax ** (p - 2)
        hess = np.zeros((len(x), self.dim, self.dim))
        idx = np.arange(self.dim)
        hess[:, idx, idx] = diag
        return val, grad, hess

    def value(self, x):
        x, _ = _as_rows(x, self.dim)
        return np.sum(np.abs(x) ** self.p, axis=1) - 1

    def exceptional(self, x):
        x, _ = _as_rows(x, self.dim)
        if self.p >= 2:
            return np.zeros(len(x), dtype=bool)
        return np.any(x == 0, axis=1)

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return np.sum(np.abs(u) ** self.q, axis=-1) ** (1 / self.q)

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        q = self.q
        hq = np.sum(np.abs(u) ** q, axis=-1, keepdims=True) ** (1 / q)
        return np.sign(u) * (np.abs(u) / hq) ** (q - 1)

    def radial(self, xi, center=None):
        if center is not None and np.any(np.asarray(center) != 0):
            return super().radial(xi, center)
        xi, single = _as_rows(xi, self.dim)
        xi = _unit(xi)
        r = np.sum(np.abs(xi) ** self.p, axis=1) ** (-1 / self.p)
        return r[0] if single else r

    def volume(self) -> float:
        p, n = self.p, self.dim
        return (2 * math.gamma(1 + 1 / p)) ** n / math.gamma(1 + n / p)


class AffineImage(SmoothBody):
    """Image T(K) + b of a smooth body K under an invertible affine map."""

    def __init__(self, base: SmoothBody, T, b=None):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape != (base.dim, base.dim):
            raise GeometryError("affine map has wrong shape")
        det = np.linalg.det(T)
        if abs(det) <= 1e-12:
            raise GeometryError("affine map is singular")
        b = np.zeros(base.dim) if b is None else np.asarray(b, dtype=float)
        super().__init__(base.dim, T @ base.center + b, symmetric=base.symmetric)
        self.base, self.T, self.b, self.det = base, T, b, det
        self.Tinv = np.linalg.inv(T)

    def _pull(self, y):
        y, single = _as_rows(y, self.dim)
        return (y - self.b) @ self.Tinv.T, single

    def F(self, y):
        x, _ = self._pull(y)
        val, g, H = self.base.F(x)
        grad = g @ self.Tinv
        hess = np.einsum("ji,mjk,kl->mil", self.Tinv, H, self.Tinv)
        return val, grad, hess

    def value(self, y):
        x, _ = self._pull(y)
        return self.base.value(x)

    def exceptional(self, y):
        x, _ = self._pull(y)
        return self.base.exceptional(x)

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return self.base.support(u @ self.T) + u @ self.b

    def support_point(self, u):
        u = np.asarray(u, dtype=float)
        return self.base.support_point(u @ self.T) @ self.T.T + self.b

    def ray_exit(self, points, vecs):
        p, _ = self._pull(points)
        v, _ = _as_rows(vecs, self.dim)
        return self.base.ray_exit(p, v @ self.Tinv.T)

    def chord(self, base, u):
        y, _ = self._pull(base)
        u = np.asarray(u, dtype=float)
        return self.base.chord(y, u @ self.Tinv.T)

    def volume(self) -> float:
        return abs(self.det) * self.base.volume()

    def cap(self, xi, depth):
        xi, _ = _as_rows(xi, self.dim)
        eta = xi @ self.T
        m = np.linalg.norm(eta, axis=1)
        vol, sec = self.base.cap(eta / m[:, None], np.asarray(depth, dtype=float) / m)
        return abs(self.det) * vol, abs(self.det) * sec / m


def ellipsoid(*axes: float, center=None) -> AffineImage:
    """Axis-parallel ellipsoid with the given semi-axes."""
    a = np.asarray(axes, dtype=float)
    if np.any(a <= 0):
        raise GeometryError("semi-axes must be positive")
    return AffineImage(Ball(len(a)), np.diag(a), center)


class ImplicitBody(SmoothBody):
    """User-supplied convex body {F <= 0}; F returns (value, gradient, Hessian)."""

    def __init__(self, F: Callable, dim: int, box, center=None, symmetric=False,
                 exceptional: Callable | None = None):
        super().__init__(dim, center, symmetric)
        self._F = F
        self.box = (np.asarray(box[0], float), np.asarray(box[1], float))
        self._exc = exceptional

    def F(self, x):
        x, _ = _as_rows(x, self.dim)
        return self._F(x)

    def exceptional(self, x):
        x, _ = _as_rows(x, self.dim)
        return self._exc(x) if self._exc else super().exceptional(x)

    def diameter_bound(self) -> float:
        return float(np.linalg.norm(self.box[1] - self.box[0]))

    def support_point(self, u):
        u, single = _as_rows(u, self.dim)
        u = _unit(u)
        # ray from the center in direction u, then climb along the boundary
        grid = SphereGrid.default(self.dim, 2048 if self.dim == 2 else 4096)
        pts = self.boundary_points(grid)
        idx = np.argmax(u @ pts.T, axis=1)
        out = pts[idx]
        return out[0] if single else out


# ---------------------------------------------------------------------------
# Star bodies and intersections
# ---------------------------------------------------------------------------


class StarBody(ConvexBody):
    """Star body about the origin given by its radial function.

    ``rho`` is either a callable on unit vectors or values on ``grid``; in the
    latter case radii are interpolated (periodic linear in angle for n = 2,
    inverse-distance over the three nearest grid directions otherwise).
    """

    convex = False

    def __init__(self, rho, grid: SphereGrid | None = None, dim: int | None = None):
        if callable(rho):
            if dim is None:
                raise GeometryError("dimension required for a callable radial function")
            self.dim = dim
            self._fn = rho
        else:
            if grid is None:
                raise GeometryError("radial samples need their grid")
            vals = np.asarray(rho, dtype=float)
            if np.any(vals <= 0):
                raise GeometryError("radial function must be positive")
            self.dim = grid.dim
            self._grid, self._vals = grid, vals
            self._fn = self._interp
        self.center = np.zeros(self.dim)

    def _interp(self, xi):
        d = self._grid.directions
        if self.dim == 2:
            ang = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
            order = np.argsort(ang)
            a, v = ang[order], self._vals[order]
            a = np.concatenate([a[-1:] - 2 * np.pi, a, a[:1] + 2 * np.pi])
            v = np.concatenate([v[-1:], v, v[:1]])
            q = np.mod(np.arctan2(xi[:, 1], xi[:, 0]), 2 * np.pi)
            return np.interp(q, a, v)
        dist, idx = cKDTree(d).query(xi, k=3)
        w = 1.0 / np.maximum(dist, 1e-15)
        return np.sum(w * self._vals[idx], axis=1) / np.sum(w, axis=1)

    def radial(self, xi, center=None):
        if center is not None and np.any(np.asarray(center) != 0):
            raise UnsupportedRepresentationError("star bodies are defined about the origin")
        xi, single = _as_rows(xi, self.dim)
        r = np.asarray(self._fn(_unit(xi)), dtype=float)
        return r[0] if single else r

    def contains(self, x, tol: float = 0.0):
        x, single = _as_rows(x, self.dim)
        nrm = np.linalg.norm(x, axis=1)
        safe = np.where(nrm > 0, nrm, 1.0)
        ok = (nrm == 0) | (nrm <= self.radial(x / safe[:, None]) + tol)
        return ok[0] if single else ok

    def support(self, u):
        grid = SphereGrid.default(self.dim)
        pts = self.boundary_points(grid)
        return np.max(np.asarray(u, dtype=float) @ pts.T, axis=-1)

    def star_centroid(self, grid: SphereGrid | None = None) -> np.ndarray:
        grid = grid or SphereGrid.default(self.dim)
        rho = self.radial(grid.directions)
        vol = grid.integrate(rho ** self.dim) / self.dim
        mom = (grid.weights * rho ** (self.dim + 1)) @ grid.directions
        return mom / ((self.dim + 1) * vol)


class Intersection(ConvexBody):
    """Intersection of convex bodies sharing an interior point ``center``."""

    def __init__(self, parts, center=None):
        parts = list(parts)
        if not parts:
            raise GeometryError("empty intersection")
        self.parts = parts
        self.dim = parts[0].dim
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, float)
        if not np.all(self.contains(self.center[None, :], tol=-1e-12)):
            raise EmptyBodyError("intersection does not contain its center in the interior")

    def contains(self, x, tol: float = 0.0):
        x, single = _as_rows(x, self.dim)
        ok = np.ones(len(x), dtype=bool)
        for part in self.parts:
            ok &= np.asarray(part.contains(x, tol=tol))
        return ok[0] if single else ok

    def ray_exit(self, points, vecs):
        return np.min([part.ray_exit(points, vecs) for part in self.parts], axis=0)

    def active_part(self, points, vecs) -> np.ndarray:
        return np.argmin([part.ray_exit(points, vecs) for part in self.parts], axis=0)

    def chord(self, base, u):
        los, his = zip(*(part.chord(base, u) for part in self.parts))
        lo, hi = np.max(los, axis=0), np.min(his, axis=0)
        bad = ~(lo <= hi)
        return np.where(bad, np.nan, lo), np.where(bad, np.nan, hi)

    def support(self, u):
        grid = SphereGrid.default(self.dim, 16384 if self.dim == 2 else 8192)
        pts = self.boundary_points(grid)
        return np.max(np.asarray(u, dtype=float) @ pts.T, axis=-1)

    def normals(self, x):
        x, single = _as_rows(x, self.dim)
        out = np.empty_like(x)
        d = x - self.center
        idx = self.active_part(np.broadcast_to(self.center, x.shape), d)
        for k, part in enumerate(self.parts):
            m = idx == k
            if m.any():
                out[m] = part.normals(x[m])
        return out[0] if single else out


class Union(ConvexBody):
    """Union of bodies that are star-shaped about a common ``center``.

    Only meaningful as a convex body when the union happens to be convex;
    callers check that (see ``affine.valuation_defect``).
    """

    def __init__(self, parts, center=None):
        parts = list(parts)
        if not parts:
            raise GeometryError("empty union")
        self.parts = parts
        self.dim = parts[0].dim
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, float)

    def contains(self, x, tol: float = 0.0):
        x, single = _as_rows(x, self.dim)
        ok = np.zeros(len(x), dtype=bool)
        for part in self.parts:
            ok |= np.asarray(part.contains(x, tol=tol))
        return ok[0] if single else ok

    def ray_exit(self, points, vecs):
        return np.max([part.ray_exit(points, vecs) for part in self.parts], axis=0)

    def active_part(self, points, vecs) -> np.ndarray:
        return np.argmax([part.ray_exit(points, vecs) for part in self.parts], axis=0)

    def support(self, u):
        return np.max([np.asarray(part.support(u)) for part in self.parts], axis=0)

    def normals(self, x):
        x, single = _as_rows(x, self.dim)
        out = np.empty_like(x)
        idx = self.active_part(np.broadcast_to(self.center, x.shape), x - self.center)
        for k, part in enumerate(self.parts):
            m = idx == k
            if m.any():
                out[m] = part.normals(x[m])
        return out[0] if single else out


def halfspace_body(normal, offset, dim: int, extent: float = 1e3) -> HPolytope:
    """A halfspace, truncated by a huge box so it is a bounded polytope."""
    A = np.vstack([np.asarray(normal, float)[None, :], np.eye(dim), -np.eye(dim)])
    b = np.concatenate([[offset], np.full(2 * dim, extent)])
    return HPolytope(A=A, b=b)
