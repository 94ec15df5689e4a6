"""Elementary functionals of convex bodies.

Support and radial functions, polarity, volume and centroid, Hausdorff and
symmetric-difference distances, Minkowski sums, the first mixed volume, the
surface area measure of a polytope, projection-body support values and
Steiner symmetrization.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .bodies import (
    ConvexBody,
    Polytope,
    SmoothBody,
    VPolytope,
    _merge_facets,
    _unit,
    perp2,
    perp_basis,
)
from .errors import (
    AcceptanceRateError,
    DimensionUnsupportedError,
    GeometryError,
    OriginNotInteriorError,
    UnsupportedRepresentationError,
)
from .grids import SphereGrid
from .rng import pmap, stream

MC_CHUNK = 1 << 15


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(np.linalg.norm(u, axis=-1) - 1) > 1e-9):
        raise GeometryError("direction must be a unit vector")
    return u


def support(K: ConvexBody, u) -> float:
    """h_K(u) = max over K of <x, u>."""
    return K.support(_check_unit(u))


def radial(L: ConvexBody, xi) -> float:
    """rho_L(xi) about the origin."""
    return L.radial(_check_unit(xi), np.zeros(L.dim))


def polar_polytope(P: Polytope) -> VPolytope:
    """Polar body {y : <x, y> <= 1 for all x in P} (origin must be interior)."""
    if np.any(P.b <= 1e-12):
        raise OriginNotInteriorError("origin is not an interior point of the polytope")
    return VPolytope(P.A / P.b[:, None])


# ---------------------------------------------------------------------------
# Monte Carlo plumbing
# ---------------------------------------------------------------------------


def _bbox(K: ConvexBody):
    lo, hi = K.bbox()
    return np.asarray(lo, float), np.asarray(hi, float)


def rejection_chunks(K: ConvexBody, count: int, seed: int, key=(), workers: int = 1,
                     box=None):
    """Draw box-uniform candidates in fixed-size chunks; yields (points, mask)."""
    lo, hi = _bbox(K) if box is None else box
    n_chunks = -(-count // MC_CHUNK)

    def run(i):
        size = min(MC_CHUNK, count - i * MC_CHUNK)
        rng = stream(seed, *key, i)
        pts = lo + (hi - lo) * rng.random((size, len(lo)))
        return pts, np.asarray(K.contains(pts))

    return pmap(run, list(range(n_chunks)), workers)


def sample_uniform(K: ConvexBody, count: int, seed: int, key=(), workers: int = 1,
                   min_rate: float = 1e-3):
    """``count`` i.i.d. uniform points of K by bounding-box rejection.

    Returns (points, acceptance_rate).  Deterministic for fixed seed/key and
    independent of ``workers``.
    """
    lo, hi = _bbox(K)
    got: list[np.ndarray] = []
    have = 0
    tried = 0
    accepted = 0
    rnd = 0
    while have < count:
        need = count - have
        guess = max(64, int(need * 1.3 / max(accepted / tried, min_rate) if tried else need * 2))
        for pts, mask in rejection_chunks(K, guess, seed, (*key, rnd), workers, (lo, hi)):
            got.append(pts[mask])
            have += int(mask.sum())
            accepted += int(mask.sum())
            tried += len(mask)
        rnd += 1
        if tried >= 10_000 and accepted / tried < min_rate:
            raise AcceptanceRateError(f"acceptance rate {accepted / tried:.2e} below {min_rate}")
    return np.vstack(got)[:count], accepted / tried


@dataclass
class Moments:
    volume: float
    centroid: np.ndarray
    stderr: float
    exact: bool
    acceptance: float = 1.0
    centroid_stderr: np.ndarray = field(default_factory=lambda: np.zeros(0))


def moments(K: ConvexBody, samples: int = 200_000, seed: int = 0, workers: int = 1) -> Moments:
    """Volume and centroid: exact for polytopes (n <= 3), Monte Carlo otherwise."""
    if isinstance(K, Polytope):
        return Moments(K.volume(), K.centroid(), 0.0, True, 1.0, np.zeros(K.dim))
    lo, hi = _bbox(K)
    box = float(np.prod(hi - lo))
    hits = 0
    total = 0
    sums = np.zeros(K.dim)
    sq = np.zeros(K.dim)
    for pts, mask in rejection_chunks(K, samples, seed, (), workers, (lo, hi)):
        acc = pts[mask]
        hits += len(acc)
        total += len(mask)
        sums += acc.sum(axis=0)
        sq += (acc ** 2).sum(axis=0)
    p = hits / total
    vol = box * p
    se = box * math.sqrt(p * (1 - p) / total)
    cen = sums / hits
    cse = np.sqrt(np.maximum(sq / hits - cen ** 2, 0) / hits)
    return Moments(vol, cen, se, False, p, cse)


def volume_by_quadrature(K: ConvexBody, grid: SphereGrid | None = None) -> float:
    """(1/n) * integral of rho^n over the sphere, about K's center."""
    grid = grid or SphereGrid.default(K.dim)
    rho = K.radial(grid.directions)
    return grid.integrate(rho ** K.dim) / K.dim


# ---------------------------------------------------------------------------
# Distances, sums, mixed volume
# ---------------------------------------------------------------------------


def hausdorff_distance(C: ConvexBody, K: ConvexBody, grid: SphereGrid | None = None) -> float:
    """max over grid of |h_C - h_K| (equals d_H for convex bodies up to grid resolution)."""
    if not (C.convex and K.convex):
        raise GeometryError("Hausdorff distance via support functions needs convex bodies")
    grid = grid or SphereGrid.default(C.dim)
    u = grid.directions
    return float(np.max(np.abs(np.asarray(C.support(u)) - np.asarray(K.support(u)))))


def symdiff_volume(C: ConvexBody, K: ConvexBody, samples: int = 200_000, seed: int = 0,
                   workers: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate (value, stderr) of vol(C Δ K)."""
    lo1, hi1 = _bbox(C)
    lo2, hi2 = _bbox(K)
    lo, hi = np.minimum(lo1, lo2), np.maximum(hi1, hi2)
    box = float(np.prod(hi - lo))
    n_chunks = -(-samples // MC_CHUNK)

    def run(i):
        size = min(MC_CHUNK, samples - i * MC_CHUNK)
        pts = lo + (hi - lo) * stream(seed, 7, i).random((size, len(lo)))
        return int(np.sum(np.asarray(C.contains(pts)) != np.asarray(K.contains(pts))))

    hits = sum(pmap(run, list(range(n_chunks)), workers))
    p = hits / samples
    return box * p, box * math.sqrt(p * (1 - p) / samples)


def body_distance(C: ConvexBody, K: ConvexBody, mode: str = "hausdorff",
                  grid: SphereGrid | None = None, samples: int = 200_000, seed: int = 0):
    if mode == "hausdorff":
        return hausdorff_distance(C, K, grid)
    if mode == "symdiff":
        return symdiff_volume(C, K, samples, seed)[0]
    raise ValueError(f"unknown distance mode {mode!r}")


def minkowski_sum(P: VPolytope, Q: VPolytope) -> VPolytope:
    """Convex hull of all pairwise vertex sums."""
    if P.dim != Q.dim:
        raise GeometryError("Minkowski summands must share a dimension")
    pts = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return VPolytope(pts)


@dataclass
class SurfaceMeasureAtoms:
    normals: np.ndarray
    masses: np.ndarray

    def total(self) -> float:
        return math.fsum(self.masses)

    def integrate(self, fn) -> float:
        return math.fsum(self.masses * np.asarray(fn(self.normals)))


def _simplex_area(pts: np.ndarray) -> float:
    """(k)-volume of the simplex spanned by k+1 points in R^n."""
    E = pts[1:] - pts[0]
    k = E.shape[0]
    return math.sqrt(max(np.linalg.det(E @ E.T), 0.0)) / math.factorial(k)


def surface_measure(P: Polytope) -> SurfaceMeasureAtoms:
    """One atom (outward facet normal, facet area) per facet."""
    if P.dim > 3:
        raise DimensionUnsupportedError("exact facet areas need n <= 3")
    hull = P.hull
    _, _, labels = _merge_facets(hull.equations)
    areas = np.array([_simplex_area(hull.points[s]) for s in hull.simplices])
    k = labels.max() + 1
    masses = np.bincount(labels, weights=areas, minlength=k)
    first = np.array([np.flatnonzero(labels == g)[0] for g in range(k)])
    normals = hull.equations[first, :-1]
    masses_arr = masses
    if np.any(masses_arr <= 1e-12):
        raise GeometryError("degenerate facet with (near) zero area")
    return SurfaceMeasureAtoms(normals, masses_arr)


def surface_measure_smooth(K: ConvexBody, fn, grid: SphereGrid | None = None) -> float:
    """Integral of fn(N(x)) over the boundary of a smooth body (radial parametrization)."""
    grid = grid or SphereGrid.default(K.dim)
    xi = grid.directions
    rho = K.radial(xi)
    x = K.center + rho[:, None] * xi
    N = K.normals(x)
    jac = rho ** (K.dim - 1) / np.sum(xi * N, axis=1)
    return float(np.dot(grid.weights, jac * np.asarray(fn(N))))


def mixed_volume_v1(K: ConvexBody, C: ConvexBody, grid: SphereGrid | None = None) -> float:
    """V_1(K, C) = (1/n) integral of h_C against the surface area measure of K."""
    n = K.dim
    if isinstance(K, Polytope):
        atoms = surface_measure(K)
        return atoms.integrate(C.support) / n
    if isinstance(K, SmoothBody):
        return surface_measure_smooth(K, C.support, grid) / n
    raise UnsupportedRepresentationError("V_1 needs a polytope or smooth first argument")


def mixed_volume_v1_fd(K: Polytope, C: Polytope, eps=(1e-2, 5e-3, 2.5e-3)) -> float:
    """Finite-difference V_1 with Richardson extrapolation (exact sums, n <= 3)."""
    vk = K.volume()
    vals = []
    for e in eps:
        scaled = VPolytope(C.vertices * e)
        vals.append((minkowski_sum(K, scaled).volume() - vk) / (K.dim * e))
    # quotient is a polynomial in eps with zero-th order term V_1
    est = np.polyfit(np.asarray(eps), np.asarray(vals), len(eps) - 1)
    return float(est[-1])


def projection_body_support(K: ConvexBody, xi, grid: SphereGrid | None = None) -> float:
    """vol_{n-1} of the orthogonal projection of K onto xi^perp."""
    xi = _check_unit(xi)
    n = K.dim
    if n == 2:
        return float(K.width(perp2(xi)))
    if n != 3:
        raise DimensionUnsupportedError("projection bodies are supported for n in {2, 3}")
    if isinstance(K, Polytope):
        B = perp_basis(xi)
        return float(ConvexHull(K.vertices @ B.T).volume)
    # Cauchy: shadow area = (1/2) * integral over the boundary of |<xi, N>|
    return 0.5 * surface_measure_smooth(K, lambda N: np.abs(N @ xi), grid)


# ---------------------------------------------------------------------------
# Steiner symmetrization
# ---------------------------------------------------------------------------


def _projection_extent_2d(K: ConvexBody, w: np.ndarray):
    return -float(K.support(-w)), float(K.support(w))


def steiner_symmetrize(K: ConvexBody, u, resolution: int = 1024,
                       max_drift: float = 5e-3) -> VPolytope:
    """Steiner symmetral of K in the hyperplane u^perp, as a polytope.

    Chords parallel to u are recentred on u^perp with unchanged length.  For
    planar polytopes the symmetral is computed exactly (its vertices sit above
    the projections of K's vertices) as long as the vertex count stays below
    ``resolution``; otherwise chords are sampled at ``resolution`` base points.
    """
    u = _unit(np.asarray(u, dtype=float))
    n = K.dim
    exact = False
    if n == 2:
        w = perp2(u)
        exact = isinstance(K, Polytope) and 2 * len(K.vertices) <= resolution
        if exact:
            ys = np.unique(K.vertices @ w)
        else:
            a, b = _projection_extent_2d(K, w)
            k = np.arange(resolution)
            ys = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * k / (resolution - 1))
        base = ys[:, None] * w[None, :]
        lo, hi = K.chord(base, u)
        L = np.nan_to_num(hi - lo)
        pts = np.vstack([base + 0.5 * L[:, None] * u, base - 0.5 * L[:, None] * u])
    elif n == 3:
        B = perp_basis(u)
        c = K.center - np.dot(K.center, u) * u
        m = int(math.sqrt(resolution)) + 4
        phis = 2 * np.pi * np.arange(4 * m) / (4 * m)
        base_pts = [c]
        for phi in phis:
            e = math.cos(phi) * B[0] + math.sin(phi) * B[1]
            # extent of the projection along e, by bisection on chord existence
            lo_r, hi_r = 0.0, K.diameter_bound()
            for _ in range(50):
                mid = 0.5 * (lo_r + hi_r)
                a, b = K.chord((c + mid * e)[None, :], u)
                if np.isfinite(a[0]) and b[0] >= a[0]:
                    lo_r = mid
                else:
                    hi_r = mid
            radii = lo_r * np.sin(0.5 * np.pi * np.arange(1, m + 1) / m)
            base_pts.extend(c + r * e for r in radii)
        base = np.array(base_pts)
        if isinstance(K, Polytope):
            proj = K.vertices - np.outer(K.vertices @ u, u)
            base = np.vstack([base, proj])
        lo, hi = K.chord(base, u)
        L = np.nan_to_num(hi - lo)
        pts = np.vstack([base + 0.5 * L[:, None] * u, base - 0.5 * L[:, None] * u])
    else:
        raise DimensionUnsupportedError("Steiner symmetrization is implemented for n in {2, 3}")
    result = VPolytope(pts)
    v0 = K.volume()
    drift = abs(result.volume() - v0) / v0
    if not exact and drift > 0:
        # sampled chords give an inscribed polytope; restore the volume about the chord midplane centre
        mid = result.vertices.mean(axis=0)
        result = VPolytope(mid + (result.vertices - mid) * (v0 / result.volume()) ** (1 / n))
    if drift > max_drift:
        warnings.warn(f"Steiner symmetral volume drift {drift:.2e} exceeds {max_drift:.1e}; "
                      "increase the resolution", RuntimeWarning, stacklevel=2)
    return result
