"""Convex floating bodies and the rolling function.

The floating body K_t is approximated from outside by intersecting the
halfspaces that cut volume t off K in finitely many grid directions.  The
rolling radius r(x) is the radius of the largest ball inside K that touches
x; the measure of {r >= t} is compared with (1 - t)^(n-1) times the surface
area for bodies containing the unit ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import (
    ConvexBody,
    HPolytope,
    Polytope,
    SmoothBody,
    _as_rows,
    perp2,
    perp_basis,
)
from .core import surface_measure
from .curvature import curvature_implicit, principal_curvatures
from .errors import (
    ContainmentError,
    EmptyBodyError,
    NotOnBoundaryError,
    ParameterRangeError,
    UnsupportedRepresentationError,
)
from .grids import SphereGrid, ball_volume
from .rng import stream

CAP_REL_TOL = 1e-4
CAP_ABS_TOL = 1e-10
MIN_INRADIUS = 1e-9


# ---------------------------------------------------------------------------
# cap heights
# ---------------------------------------------------------------------------


def cap_depths(K: ConvexBody, xi, t: float, volume: float | None = None) -> np.ndarray:
    """Depths w(xi) with vol(K ∩ {<x, xi> >= h_K(xi) - w}) = t.

    Cap volume is increasing in the depth with derivative equal to the
    section area, so a bracketed Newton iteration (bisection fallback)
    converges for every direction at once.
    """
    xi, _ = _as_rows(xi, K.dim)
    vol = K.volume() if volume is None else volume
    if not 0 < t < 0.5 * vol * (1 + 1e-12):
        raise ParameterRangeError(f"cut volume t={t} must lie in (0, vol(K)/2]")
    lo = np.zeros(len(xi))
    hi = np.asarray(K.width(xi), dtype=float)
    # start from the log-midpoint region: few coarse bisection steps in log scale
    a, b = np.log(hi * 1e-14), np.log(hi)
    for _ in range(10):
        m = 0.5 * (a + b)
        v, _ = K.cap(xi, np.exp(m))
        big = v > t
        b = np.where(big, m, b)
        a = np.where(big, a, m)
        hi = np.where(big, np.minimum(hi, np.exp(m)), hi)
        lo = np.where(big, lo, np.maximum(lo, np.exp(m)))
    w = np.exp(0.5 * (a + b))
    tol = max(CAP_ABS_TOL, CAP_REL_TOL * t) * 1e-4
    for _ in range(100):
        v, s = K.cap(xi, w)
        f = v - t
        if np.all(np.abs(f) <= tol):
            break
        hi = np.where(f > 0, np.minimum(hi, w), hi)
        lo = np.where(f < 0, np.maximum(lo, w), lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = w - f / s
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        w = np.where(np.abs(f) <= tol, w, np.where(bad, 0.5 * (lo + hi), step))
    v, _ = K.cap(xi, w)
    if np.any(np.abs(v - t) > max(CAP_ABS_TOL, CAP_REL_TOL * t)):
        raise ParameterRangeError("cap volume did not converge")
    return w


def cap_height(K: ConvexBody, xi, t: float) -> float | np.ndarray:
    """Offset c with vol(K ∩ {<x, xi> >= c}) = t."""
    xi_rows, single = _as_rows(xi, K.dim)
    c = np.asarray(K.support(xi_rows)) - cap_depths(K, xi_rows, t)
    return float(c[0]) if single else c


# ---------------------------------------------------------------------------
# floating bodies
# ---------------------------------------------------------------------------


@dataclass
class FloatingBodyResult:
    t: float
    body: HPolytope
    deficit: float
    normalized: float
    offsets: np.ndarray
    grid: SphereGrid = field(repr=False)


def floating_body(K: ConvexBody, t: float, grid: SphereGrid | None = None) -> FloatingBodyResult:
    """Outer approximation of K_t by the grid's volume-t cuts."""
    grid = grid or SphereGrid.default(K.dim)
    vol = K.volume()
    c = cap_height(K, grid.directions, t)
    try:
        Kt = HPolytope(A=grid.directions, b=c)
    except EmptyBodyError as exc:
        raise EmptyBodyError(f"floating body for t={t} is empty") from exc
    if Kt.chebyshev[1] < MIN_INRADIUS:
        raise EmptyBodyError(f"floating body for t={t} has inradius below {MIN_INRADIUS}")
    deficit = vol - Kt.volume()
    n = K.dim
    return FloatingBodyResult(t, Kt, deficit, deficit / t ** (2 / (n + 1)), c, grid)


def floating_constant(n: int) -> float:
    """Factor turning deficit / t^(2/(n+1)) into affine surface area."""
    return 2 * (ball_volume(n - 1) / (n + 1)) ** (2 / (n + 1))


@dataclass
class FloatingEstimate:
    t: float
    deficit: float
    normalized: float
    estimate: float
    refined: float
    bias: float


def asa_via_floating(K: ConvexBody, t_sequence, n_points: int | None = None) -> list[FloatingEstimate]:
    """Affine surface area estimates from floating-body deficits.

    Each t is solved on a grid of N and of 4N directions; ``bias`` is the gap
    between the two estimates and ``refined`` removes the leading 1/N^2
    outer-approximation error by Richardson extrapolation.
    """
    ts = [float(t) for t in t_sequence]
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise ParameterRangeError("t sequence must be strictly decreasing")
    n = K.dim
    base = SphereGrid.default(n, n_points)
    fine = SphereGrid.default(n, 4 * len(base))
    const = floating_constant(n)
    out = []
    for t in ts:
        coarse = floating_body(K, t, base)
        dense = floating_body(K, t, fine)
        scale = const / t ** (2 / (n + 1))
        est, est_fine = coarse.deficit * scale, dense.deficit * scale
        p = 2.0 if n == 2 else 1.0  # outer polygon error ~ N^-2 (n = 2), ~ N^-1 (n = 3, N ~ h^-2)
        r = 4.0 ** p
        refined = (r * est_fine - est) / (r - 1)
        out.append(FloatingEstimate(t, coarse.deficit, coarse.normalized, est, refined,
                                    abs(est_fine - est)))
    return out


# ---------------------------------------------------------------------------
# rolling function
# ---------------------------------------------------------------------------


def _polytope_rolling(P: Polytope, x: np.ndarray, facet: np.ndarray) -> np.ndarray:
    """Exact rolling radius at points x lying in the relative interior of ``facet``."""
    N = P.A[facet]
    slack = P.b[None, :] - x @ P.A.T
    denom = 1.0 - N @ P.A.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 1e-12, slack / denom, np.inf)
    return np.maximum(np.min(ratio, axis=1), 0.0)


def _smooth_rolling(K: SmoothBody, x: np.ndarray, grid: SphereGrid,
                    window: float = 1e-3) -> np.ndarray:
    """min over u of (h(u) - <x,u>) / (1 - <N,u>), with the u -> N limit taken exactly."""
    N = K.normals(x)
    U = grid.directions
    hU = np.asarray(K.support(U))
    out = np.empty(len(x))
    for s in range(0, len(x), 256):
        xs, Ns = x[s:s + 256], N[s:s + 256]
        num = hU[None, :] - xs @ U.T
        den = 1.0 - Ns @ U.T
        ratio = np.where(den > 0.5 * window ** 2, num / np.maximum(den, 1e-300), np.inf)
        best = np.argmin(ratio, axis=1)
        out[s:s + 256] = ratio[np.arange(len(xs)), best]
        out[s:s + 256] = _refine_rolling(K, xs, Ns, U[best], out[s:s + 256], window)
    # limit u -> N: the smallest principal radius of curvature
    kmax = np.array([principal_curvatures(K, p).max() for p in x])
    with np.errstate(divide="ignore"):
        limit = np.where(kmax > 0, 1.0 / kmax, np.inf)
    return np.minimum(out, limit)


def _refine_rolling(K, x, N, u0, val, window):
    """Local pattern search around the best grid direction."""
    n = K.dim
    best_u, best = u0.copy(), val.copy()
    step = 0.02 if n == 3 else 2 * math.pi / 4096
    for _ in range(30):
        improved = np.zeros(len(x), dtype=bool)
        if n == 2:
            cand = [best_u * math.cos(d) + perp2(best_u) * math.sin(d) for d in (-step, step)]
        else:
            cand = []
            for k in range(len(best_u)):
                B = perp_basis(best_u[k])
                cand.append(B)
            cand = [np.array([best_u[k] * math.cos(step) + math.sin(step) * (sgn * cand[k][j])
                              for k in range(len(best_u))])
                    for j in range(2) for sgn in (-1, 1)]
        for c in cand:
            num = np.asarray(K.support(c)) - np.sum(x * c, axis=1)
            den = 1.0 - np.sum(N * c, axis=1)
            r = np.where(den > 0.5 * window ** 2, num / np.maximum(den, 1e-300), np.inf)
            better = r < best
            best = np.where(better, r, best)
            best_u = np.where(better[:, None], c, best_u)
            improved |= better
        if not improved.any():
            step *= 0.5
            if step < 1e-9:
                break
    return best


def rolling_radius(K: ConvexBody, x, grid: SphereGrid | None = None, tol: float = 1e-9):
    """Radius of the largest ball in K whose boundary passes through x (0 at non-smooth points)."""
    x, single = _as_rows(x, K.dim)
    if isinstance(K, Polytope):
        gap = x @ K.A.T - K.b[None, :]
        if np.any(np.max(gap, axis=1) > tol) or np.any(np.max(gap, axis=1) < -tol):
            raise NotOnBoundaryError("point is not on the boundary of the polytope")
        active = np.abs(gap) <= tol
        unique = active.sum(axis=1) == 1
        r = np.zeros(len(x))
        if unique.any():
            r[unique] = _polytope_rolling(K, x[unique], np.argmax(active[unique], axis=1))
    elif isinstance(K, SmoothBody):
        val = np.asarray(K.value(x))
        if np.any(np.abs(val) > tol):
            raise NotOnBoundaryError("point is not on the boundary of the body")
        r = _smooth_rolling(K, x, grid or SphereGrid.default(K.dim))
    else:
        raise UnsupportedRepresentationError(f"no rolling radius for {type(K).__name__}")
    return float(r[0]) if single else r


# ---------------------------------------------------------------------------
# the profile m(t) = H^{n-1}{r >= t}
# ---------------------------------------------------------------------------


@dataclass
class RollingProfile:
    t: np.ndarray
    measure: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray
    surface_area: float
    samples: int

    @property
    def holds(self) -> np.ndarray:
        """Inequality m(t) >= (1-t)^(n-1) vol(dK), allowing 3 standard errors."""
        return self.measure >= self.reference - 3 * self.stderr - 1e-12


def _sample_polytope_boundary(P: Polytope, count: int, seed: int):
    """H^{n-1}-uniform boundary samples with their rolling radii (exact)."""
    rng = stream(seed, 51)
    hull = P.hull
    tri = hull.points[hull.simplices]
    n = P.dim
    if n == 2:
        areas = np.linalg.norm(tri[:, 1] - tri[:, 0], axis=1)
    else:
        areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    k = rng.choice(len(tri), size=count, p=areas / areas.sum())
    if n == 2:
        s = rng.random(count)[:, None]
        pts = tri[k, 0] + s * (tri[k, 1] - tri[k, 0])
    else:
        a, b = rng.random((2, count))
        flip = a + b > 1
        a, b = np.where(flip, 1 - a, a), np.where(flip, 1 - b, b)
        pts = tri[k, 0] + a[:, None] * (tri[k, 1] - tri[k, 0]) + b[:, None] * (tri[k, 2] - tri[k, 0])
    # facet of each simplex in the merged H-representation
    eq = hull.equations[:, :-1]
    facet = np.argmax(eq @ P.A.T, axis=1)
    return pts, _polytope_rolling(P, pts, facet[k]), float(areas.sum())


def sw1_profile(K: ConvexBody, t_grid=None, samples: int = 100_000, seed: int = 0,
                grid: SphereGrid | None = None) -> RollingProfile:
    """Estimate m(t) by H^{n-1}-uniform boundary sampling of the rolling radius."""
    n = K.dim
    t = np.linspace(0.0, 1.0, 21) if t_grid is None else np.asarray(t_grid, dtype=float)
    check = SphereGrid.default(n)
    if np.any(np.asarray(K.support(check.directions)) < 1 - 1e-12):
        raise ContainmentError("K does not contain the unit ball")
    if isinstance(K, Polytope):
        _, r, area = _sample_polytope_boundary(K, samples, seed)
    elif isinstance(K, SmoothBody):
        g = grid or SphereGrid.default(n, 4096 if n == 2 else 4000)
        rho = K.radial(g.directions)
        x = K.center + rho[:, None] * g.directions
        nrm = K.normals(x)
        mass = g.weights * rho ** (n - 1) / np.sum(g.directions * nrm, axis=1)
        area = float(mass.sum())
        r_grid = _smooth_rolling(K, x, SphereGrid.default(n))
        idx = stream(seed, 52).choice(len(x), size=samples, p=mass / area)
        r = r_grid[idx]
    else:
        raise UnsupportedRepresentationError(f"no boundary sampler for {type(K).__name__}")
    p = np.array([np.mean(r >= tt * (1 - 1e-12)) for tt in t])
    m = area * p
    se = area * np.sqrt(p * (1 - p) / samples)
    ref = (1 - t) ** (n - 1) * area
    return RollingProfile(t, m, se, ref, area, samples)


def random_containing_polygon(seed: int, n_sides: int = 9, spread: float = 0.6) -> HPolytope:
    """Random polygon circumscribed about the unit disk's neighbourhood (contains B_2^2)."""
    rng = stream(seed, 53)
    while True:
        ang = np.sort(rng.uniform(0, 2 * math.pi, n_sides))
        gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * math.pi]))
        if gaps.max() < 0.9 * math.pi:
            break
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    b = 1.0 + rng.exponential(spread, n_sides) * (rng.random(n_sides) < 0.7)
    return HPolytope(A=A, b=b)


def curvature_rolling_gap(K: SmoothBody, x) -> np.ndarray:
    """1/r(x) - kappa(x)^(1/(n-1)); nonnegative up to numerical error."""
    x, _ = _as_rows(x, K.dim)
    kap = np.asarray(curvature_implicit(K, x, tol=1e-8))
    r = np.asarray(rolling_radius(K, x, tol=1e-8))
    return 1.0 / r - kap ** (1.0 / (K.dim - 1))


def boundary_sample_smooth(K: SmoothBody, count: int, seed: int = 0) -> np.ndarray:
    """Boundary points of a smooth body chosen radially from random directions."""
    g = SphereGrid.random(K.dim, 2 * count, seed)
    rho = K.radial(g.directions[:count])
    return K.center + rho[:, None] * g.directions[:count]


def surface_area(K: ConvexBody, grid: SphereGrid | None = None) -> float:
    if isinstance(K, Polytope):
        return surface_measure(K).total()
    g = grid or SphereGrid.default(K.dim)
    rho = K.radial(g.directions)
    x = K.center + rho[:, None] * g.directions
    nrm = K.normals(x)
    n = K.dim
    return float(np.dot(g.weights, rho ** (n - 1) / np.sum(g.directions * nrm, axis=1)))
