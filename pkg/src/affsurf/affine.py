"""Affine surface area and the identities and inequalities around it.

The boundary integral of curvature^(1/(n+1)) is evaluated over a direction
grid by shooting rays from an interior point; bodies assembled from pieces
(intersections and unions) pick the active piece per direction, so flat
pieces contribute nothing and per-direction additivity is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_legendre

from .bodies import (
    AffineImage,
    Ball,
    ConvexBody,
    HPolytope,
    Intersection,
    Polytope,
    SmoothBody,
    StarBody,
    Union,
    VPolytope,
    _as_rows,
    ellipsoid,
    halfspace_body,
    perp2,
)
from .core import surface_measure, surface_measure_smooth
from .curvature import implicit_curvature_forms
from .errors import (
    CentroidError,
    DimensionUnsupportedError,
    EmptyBodyError,
    NonConvexError,
    OriginNotInteriorError,
    ParameterRangeError,
    SingularMapError,
    UnsupportedRepresentationError,
)
from .grids import SphereGrid, ball_volume
from .rng import stream


def default_asa_grid(dim: int, n_points: int | None = None) -> SphereGrid:
    """Graded circle grid in the plane (robust at axis singularities), Fibonacci in R^3."""
    if dim == 2:
        return SphereGrid.circle(n_points or 4096, graded=True)
    return SphereGrid.default(dim, n_points)


def body_asa_grid(K: ConvexBody) -> SphereGrid:
    """Default grid, pushed through the linear part of affine images so nodes follow the stretch."""
    if isinstance(K, AffineImage):
        return body_asa_grid(K.base).pushforward(K.T)
    return default_asa_grid(K.dim)


# ---------------------------------------------------------------------------
# boundary quadrature
# ---------------------------------------------------------------------------


def boundary_terms(K: ConvexBody, center, xi):
    """Radius, curvature and outer normal where rays center + s*xi leave K.

    Polytopes (and polytopal pieces) report curvature 0.  Rays that start on
    the boundary of a piece are allowed; they yield radius 0.
    """
    xi, _ = _as_rows(xi, K.dim)
    c = np.asarray(center, dtype=float)
    m = len(xi)
    if isinstance(K, (Intersection, Union)):
        exits = np.array([np.maximum(p.ray_exit(np.broadcast_to(c, xi.shape), xi), 0.0)
                          for p in K.parts])
        idx = exits.argmin(axis=0) if isinstance(K, Intersection) else exits.argmax(axis=0)
        rho = np.empty(m)
        kap = np.zeros(m)
        nrm = xi.copy()
        for k, part in enumerate(K.parts):
            sel = idx == k
            if sel.any():
                rho[sel], kap[sel], nrm[sel] = boundary_terms(part, c, xi[sel])
        return rho, kap, nrm
    if isinstance(K, Polytope):
        rho = np.maximum(K.ray_exit(np.broadcast_to(c, xi.shape), xi), 0.0)
        return rho, np.zeros(m), xi.copy()
    if isinstance(K, SmoothBody):
        rho = np.maximum(K.ray_exit(np.broadcast_to(c, xi.shape), xi), 0.0)
        x = c + rho[:, None] * xi
        _, g, H = K.F(x)
        gn = np.linalg.norm(g, axis=1)
        bad = K.exceptional(x) | (gn < 1e-300) | ~np.all(np.isfinite(H), axis=(1, 2))
        kap = np.zeros(m)
        nrm = xi.copy()
        good = ~bad
        if good.any():
            kap[good] = implicit_curvature_forms(g[good], H[good])[0]
            nrm[good] = g[good] / gn[good, None]
        return rho, kap, nrm
    raise UnsupportedRepresentationError(
        f"{type(K).__name__} has no curvature structure for affine surface area")


def _check_center(K: ConvexBody, c: np.ndarray):
    if not np.all(K.contains(c[None, :], tol=1e-12)):
        raise OriginNotInteriorError("quadrature center is not inside the body")


def _asa_quadrature(K: ConvexBody, grid: SphereGrid, center) -> float:
    xi = grid.directions
    rho, kap, nrm = boundary_terms(K, center, xi)
    n = K.dim
    cosang = np.sum(xi * nrm, axis=1)
    pos = (kap > 0) & (rho > 0)
    vals = np.zeros(len(xi))
    vals[pos] = kap[pos] ** (1.0 / (n + 1)) * rho[pos] ** (n - 1) / cosang[pos]
    return grid.integrate(vals)


@dataclass
class AsaResult:
    value: float
    method: str  # quadrature | closed_form | definitional_zero
    resolution: int
    error_estimate: float


def affine_surface_area(K: ConvexBody, grid: SphereGrid | None = None,
                        center=None) -> AsaResult:
    """Affine surface area: 0 for polytopes, boundary quadrature otherwise.

    The error estimate is the change against the same grid at half size.
    """
    if isinstance(K, Polytope):
        return AsaResult(0.0, "definitional_zero", 0, 0.0)
    if isinstance(K, StarBody):
        raise UnsupportedRepresentationError("star bodies carry no curvature information")
    if grid is None:
        grid = body_asa_grid(K) if center is None else default_asa_grid(K.dim)
    c = K.center if center is None else np.asarray(center, dtype=float)
    _check_center(K, c)
    value = _asa_quadrature(K, grid, c)
    coarse = grid.coarsen()
    err = abs(value - _asa_quadrature(K, coarse, c)) if coarse is not None else float("nan")
    return AsaResult(value, "quadrature", len(grid), err)


def bpn_asa_closed_form(p: float, n: int) -> float:
    """Affine surface area of the unit ball of l_p^n."""
    if p <= 1 or n < 2:
        raise ParameterRangeError("need p > 1 and n >= 2")
    a = (p + n - 1) / ((n + 1) * p)
    log = (n * math.log(2) + (n - 1) / (n + 1) * math.log(p - 1) + n * gammaln(a)
           - (n - 1) * math.log(p) - gammaln(n * a))
    return math.exp(log)


# ---------------------------------------------------------------------------
# affine maps
# ---------------------------------------------------------------------------


@dataclass
class AffineMap:
    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.translation = np.asarray(self.translation, dtype=float)
        if abs(self.det) <= 1e-12:
            raise SingularMapError("affine map is singular")

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @classmethod
    def linear(cls, matrix) -> "AffineMap":
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(m, np.zeros(m.shape[0]))

    def apply(self, K: ConvexBody) -> ConvexBody:
        if isinstance(K, Polytope):
            return VPolytope(K.vertices @ self.matrix.T + self.translation)
        if isinstance(K, SmoothBody):
            return K.transform(self.matrix, self.translation)
        raise UnsupportedRepresentationError(f"cannot map a {type(K).__name__}")


def affine_image_asa(asK: float, T: AffineMap, n: int | None = None) -> float:
    """as(T K) = |det T|^((n-1)/(n+1)) as(K)."""
    if asK < 0:
        raise ParameterRangeError("affine surface area is nonnegative")
    n = T.matrix.shape[0] if n is None else n
    return abs(T.det) ** ((n - 1) / (n + 1)) * asK


# ---------------------------------------------------------------------------
# inequalities
# ---------------------------------------------------------------------------


def isoperimetric_bound(K: ConvexBody, asa: float | None = None,
                        grid: SphereGrid | None = None) -> tuple[float, float]:
    """(n vol(B)^(2/(n+1)) vol(K)^((n-1)/(n+1)), as(K) / that bound)."""
    n = K.dim
    bound = n * ball_volume(n) ** (2 / (n + 1)) * K.volume() ** ((n - 1) / (n + 1))
    if asa is None:
        asa = affine_surface_area(K, grid).value
    return bound, asa / bound


def psd_root_inequality(A, B, n: int | None = None) -> tuple[float, float]:
    """(det A^(1/(n+1)) + det B^(1/(n+1)), 2 det((A+B)/2)^(1/(n+1))).

    A and B are positive semidefinite of size m; n defaults to m + 1 (the
    ambient dimension of a body whose boundary Hessians have size m).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0] + 1 if n is None else n
    e = 1.0 / (n + 1)

    def root(M):
        return max(np.linalg.det(M), 0.0) ** e

    return root(A) + root(B), 2 * root(0.5 * (A + B))


def random_psd_pair(dim: int, rng: np.random.Generator):
    """Two random PSD matrices, occasionally rank deficient."""
    out = []
    for _ in range(2):
        G = rng.standard_normal((dim, dim))
        if rng.random() < 0.2:
            G[:, -1] = 0.0
        out.append(G @ G.T)
    return out


@dataclass
class SlabFamily:
    """K = E ∩ {x_axis <= a}, C = E ∩ {x_axis >= b} with b <= a, so K ∪ C = E."""

    whole: ConvexBody
    K: ConvexBody
    C: ConvexBody
    meet: ConvexBody
    center: np.ndarray


def slab_family(E: ConvexBody, a: float, b: float, axis: int = 0) -> SlabFamily:
    if b > a:
        raise ParameterRangeError("slab family needs b <= a")
    n = E.dim
    e = np.zeros(n)
    e[axis] = 1.0
    c = np.array(E.center, dtype=float)
    c[axis] = 0.5 * (a + b)
    if not E.contains(c[None, :])[0]:
        raise EmptyBodyError("the slab misses the body")
    upper = halfspace_body(e, a, n, extent=10 * E.diameter_bound())
    lower = halfspace_body(-e, -b, n, extent=10 * E.diameter_bound())
    K = Intersection([E, upper], center=c) if a > b else _flat_piece(E, upper, c)
    C = Intersection([E, lower], center=c) if a > b else _flat_piece(E, lower, c)
    meet = Intersection([E, upper, lower], center=c) if a > b else None
    return SlabFamily(E, K, C, meet, c)


def _flat_piece(E, H, c):
    piece = Intersection.__new__(Intersection)
    piece.parts, piece.dim, piece.center = [E, H], E.dim, c
    return piece


def _union_is_convex(K: ConvexBody, C: ConvexBody, center, n_dirs: int = 256,
                     n_pairs: int = 4000, seed: int = 0) -> bool:
    grid = SphereGrid.default(K.dim, n_dirs)
    U = Union([K, C], center)
    rho = U.ray_exit(np.broadcast_to(center, grid.directions.shape), grid.directions)
    pts = center + rho[:, None] * grid.directions
    rng = stream(seed, 31)
    i, j = rng.integers(0, len(pts), (2, n_pairs))
    lam = rng.random(n_pairs)[:, None]
    mid = lam * pts[i] + (1 - lam) * pts[j]
    scale = float(np.max(rho))
    return bool(np.all(U.contains(mid, tol=1e-9 * scale)))


def valuation_defect(K: ConvexBody, C: ConvexBody, union: ConvexBody | None = None,
                     meet: ConvexBody | None = None, center=None,
                     grid: SphereGrid | None = None) -> float:
    """as(K ∪ C) + as(K ∩ C) - as(K) - as(C), all on one grid about one center."""
    c = np.asarray(K.center if center is None else center, dtype=float)
    if union is None:
        if not _union_is_convex(K, C, c):
            raise NonConvexError("K ∪ C is not convex")
        union = Union([K, C], c)
    if meet is None:
        meet = Intersection.__new__(Intersection)
        meet.parts, meet.dim, meet.center = [K, C], K.dim, c
    grid = grid or default_asa_grid(K.dim)
    parts = [_asa_quadrature(B, grid, c) if not isinstance(B, Polytope) else 0.0
             for B in (union, meet, K, C)]
    return (parts[0] + parts[1]) - (parts[2] + parts[3])


def slab_defect(E: ConvexBody, a: float, b: float, axis: int = 0,
                grid: SphereGrid | None = None) -> float:
    fam = slab_family(E, a, b, axis)
    if fam.meet is None:
        grid = grid or default_asa_grid(E.dim)
        vals = [_asa_quadrature(B, grid, fam.center) for B in (fam.whole, fam.K, fam.C)]
        return vals[0] - vals[1] - vals[2]
    return valuation_defect(fam.K, fam.C, fam.whole, fam.meet, fam.center, grid)


# ---------------------------------------------------------------------------
# Lutwak functional
# ---------------------------------------------------------------------------


def star_moments(L: ConvexBody, grid: SphereGrid | None = None) -> tuple[float, np.ndarray]:
    """Volume and centroid of a body star-shaped about the origin."""
    if isinstance(L, Polytope):
        return L.volume(), L.centroid()
    grid = grid or SphereGrid.default(L.dim)
    n = L.dim
    rho = L.radial(grid.directions, np.zeros(n))
    vol = grid.integrate(rho ** n) / n
    cen = (grid.weights * rho ** (n + 1)) @ grid.directions / ((n + 1) * vol)
    return vol, cen


def lutwak_functional(K: ConvexBody, L: ConvexBody, grid: SphereGrid | None = None,
                      centroid_tol: float = 1e-6) -> float:
    """n^(1/(n+1)) (vol(L)^(1/n) ∫ rho_L^{-1} dsigma_K)^(n/(n+1)) for centred L."""
    n = K.dim
    vol, cen = star_moments(L, grid)
    if np.linalg.norm(cen) > centroid_tol:
        raise CentroidError(f"centroid of L is {np.linalg.norm(cen):.2e} away from the origin")
    origin = np.zeros(n)

    def inv_rho(N):
        return 1.0 / L.radial(N, origin)

    if isinstance(K, Polytope):
        integral = surface_measure(K).integrate(inv_rho)
    elif isinstance(K, SmoothBody):
        integral = surface_measure_smooth(K, inv_rho, grid)
    else:
        raise UnsupportedRepresentationError("surface measure needs a polytope or smooth body")
    return n ** (1 / (n + 1)) * (vol ** (1 / n) * integral) ** (n / (n + 1))


def lutwak_candidates(K: ConvexBody, count: int = 8, seed: int = 0) -> list[ConvexBody]:
    """Centred ellipsoids, plus even radial perturbations of K when K is symmetric."""
    n = K.dim
    rng = stream(seed, 41)
    out: list[ConvexBody] = []
    for _ in range(count):
        axes = np.exp(rng.uniform(-0.7, 0.7, n))
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        out.append(ellipsoid(*axes).transform(Q))
    if getattr(K, "symmetric", False) and np.allclose(K.center, 0):
        for _ in range(count):
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            eps = rng.uniform(0.05, 0.3)

            def rho(xi, v=v, eps=eps):
                xi = np.atleast_2d(xi)
                return K.radial(xi, np.zeros(n)) * (1 + eps * (np.dot(xi, v) ** 2 - 1 / n))

            out.append(StarBody(rho, dim=n))
    return out


# ---------------------------------------------------------------------------
# Petty projection ratio
# ---------------------------------------------------------------------------


def projection_body_supports(K: ConvexBody, directions, grid: SphereGrid | None = None):
    """Vectorised shadow volumes vol_{n-1}(K | xi^perp) for many directions."""
    d = np.asarray(directions, dtype=float)
    n = K.dim
    if n == 2:
        return np.asarray(K.width(perp2(d)))
    if n != 3:
        raise DimensionUnsupportedError("projection bodies are supported for n in {2, 3}")
    # Cauchy's projection formula: shadow = (1/2) ∫ |<xi, N>| dsigma_K
    if isinstance(K, Polytope):
        atoms = surface_measure(K)
        return 0.5 * np.abs(d @ atoms.normals.T) @ atoms.masses
    grid = grid or SphereGrid.default(n)
    rho = K.radial(grid.directions)
    x = K.center + rho[:, None] * grid.directions
    N = K.normals(x)
    mass = grid.weights * rho ** (n - 1) / np.sum(grid.directions * N, axis=1)
    out = np.empty(len(d))
    for s in range(0, len(d), 256):
        out[s:s + 256] = 0.5 * np.abs(d[s:s + 256] @ N.T) @ mass
    return out


def petty_ratio(K: ConvexBody, grid: SphereGrid | None = None, asa: float | None = None) -> float:
    """as(K)^(n+1) / (n^(n+1) vol(B)^n vol_{n-1}(B^{n-1})^{-n} vol(Pi K)).

    Pi K is replaced by the circumscribed polytope given by its support values
    on the grid, so the ratio is biased low (never high).
    """
    n = K.dim
    if n not in (2, 3):
        raise DimensionUnsupportedError("Petty ratio is implemented for n in {2, 3}")
    if asa is None:
        asa = affine_surface_area(K).value
    if asa == 0.0:
        return 0.0
    grid = grid or SphereGrid.default(n, 4096 if n == 2 else 2048)
    h = projection_body_supports(K, grid.directions)
    pik = HPolytope(A=grid.directions, b=h)
    denom = n ** (n + 1) * ball_volume(n) ** n / ball_volume(n - 1) ** n * pik.volume()
    return asa ** (n + 1) / denom


# ---------------------------------------------------------------------------
# sup of as over sub-bodies: ball-intersection candidate
# ---------------------------------------------------------------------------


def ghsw_candidate(K: ConvexBody, c: float) -> ConvexBody:
    """K ∩ B(0, c sqrt(n)); K itself when K already lies in that ball."""
    n = K.dim
    if c <= 0:
        raise ParameterRangeError("c must be positive")
    origin = np.zeros(n)
    if not np.all(K.contains(origin[None, :], tol=-1e-12)):
        raise EmptyBodyError("K must contain the origin in its interior")
    R = c * math.sqrt(n)
    if isinstance(K, Polytope):
        far = float(np.max(np.linalg.norm(K.vertices, axis=1)))
    else:
        far = float(np.max(K.radial(SphereGrid.default(n).directions, origin)))
    if far <= R * (1 + 1e-12):
        return K
    return Intersection([K, Ball(n, R)], center=origin)


# ---------------------------------------------------------------------------
# Steiner symmetrization in the plane
# ---------------------------------------------------------------------------


def _graph_second_derivatives(K: SmoothBody, pts, w, u):
    _, g, H = K.F(pts)
    Fy, Fs = g @ w, g @ u
    Fyy = np.einsum("i,mij,j->m", w, H, w)
    Fys = np.einsum("i,mij,j->m", w, H, u)
    Fss = np.einsum("i,mij,j->m", u, H, u)
    d1 = -Fy / Fs
    return -(Fyy + 2 * Fys * d1 + Fss * d1 ** 2) / Fs


def steiner_asa(K: SmoothBody, u, nodes: int = 2000) -> tuple[float, float]:
    """(as(K), as(St_u K)) for a smooth planar body, from the graph description.

    Over the projection onto u^perp, K lies between a convex lower graph and a
    concave upper graph; the symmetral's upper graph is half their difference.
    as = ∫ |f''|^(1/3) dy per graph.
    """
    if K.dim != 2 or not isinstance(K, SmoothBody):
        raise DimensionUnsupportedError("graph-form Steiner ASA needs a smooth planar body")
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    w = perp2(u)
    a, b = -float(K.support(-w)), float(K.support(w))
    mid, R = 0.5 * (a + b), 0.5 * (b - a)
    t, wt = roots_legendre(nodes)
    phi = 0.5 * np.pi * t
    y = mid + R * np.sin(phi)
    dy = R * np.cos(phi) * 0.5 * np.pi * wt
    base = y[:, None] * w
    lo, hi = K.chord(base, u)
    top = np.abs(_graph_second_derivatives(K, base + hi[:, None] * u, w, u))
    bot = np.abs(_graph_second_derivatives(K, base + lo[:, None] * u, w, u))
    top = np.nan_to_num(top, posinf=0.0)
    bot = np.nan_to_num(bot, posinf=0.0)
    as_k = float(np.sum(dy * (np.cbrt(top) + np.cbrt(bot))))
    as_st = float(np.sum(dy * 2 * np.cbrt(0.5 * (top + bot))))
    return as_k, as_st
