"""Random polytopes in convex bodies and the polygon best-approximation constant.

Replicate r draws the largest sample once from ``stream(seed, tag, r)`` and
every smaller N uses a prefix of it, so all N (and all boundary densities)
share common random numbers and results are independent of worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.special import gamma

from .affine import affine_surface_area, boundary_terms
from .bodies import ConvexBody, VPolytope, _x_minus_sin
from .core import sample_uniform
from .errors import DensityError, DimensionUnsupportedError, ParameterRangeError
from .grids import SphereGrid, ball_volume, sphere_area
from .rng import mean_and_stderr, pmap, stream

DEFAULT_N = (125, 250, 500, 1000, 2000, 4000)


def sample_interior(K: ConvexBody, count: int, seed: int, key=(), workers: int = 1):
    """Uniform points of K by bounding-box rejection; returns (points, acceptance rate)."""
    return sample_uniform(K, count, seed, key=(11, *key), workers=workers, min_rate=1e-3)


def hull_volume(points) -> float:
    """Volume of the convex hull (0 for affinely dependent sets)."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[1]
    if n not in (2, 3):
        raise DimensionUnsupportedError("hull volumes are computed for n in {2, 3}")
    if len(pts) < n + 1:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


# ---------------------------------------------------------------------------
# boundary densities
# ---------------------------------------------------------------------------


@dataclass
class BoundaryDensity:
    """Density f on the boundary of K with ∫ f dmu = 1 (checked on ``grid``).

    ``fn`` maps boundary points (m, n) to unnormalised values; ``scale``
    normalises them.
    """

    K: ConvexBody
    fn: Callable
    scale: float
    grid: SphereGrid = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, x):
        return self.scale * np.asarray(self.fn(np.atleast_2d(x)), dtype=float)

    def boundary(self):
        """Grid boundary points and their surface-measure weights (cached)."""
        if "boundary" not in self._cache:
            self._cache["boundary"] = self._boundary()
        return self._cache["boundary"]

    def _boundary(self):
        K = self.K
        xi = self.grid.directions
        rho, _, nrm = boundary_terms(K, K.center, xi)
        x = K.center + rho[:, None] * xi
        mass = self.grid.weights * rho ** (K.dim - 1) / np.sum(xi * nrm, axis=1)
        return x, mass

    def total(self) -> float:
        x, mass = self.boundary()
        return float(np.dot(mass, self(x)))

    @classmethod
    def from_function(cls, K: ConvexBody, fn: Callable, grid: SphereGrid | None = None,
                      normalize: bool = True) -> "BoundaryDensity":
        grid = grid or SphereGrid.default(K.dim)
        dens = cls(K, fn, 1.0, grid)
        x, mass = dens.boundary()
        vals = np.asarray(fn(x), dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise DensityError("density must be finite and nonnegative")
        if normalize:
            dens.scale = 1.0 / float(np.dot(mass, vals))
        return dens

    @classmethod
    def uniform(cls, K: ConvexBody, grid: SphereGrid | None = None) -> "BoundaryDensity":
        return cls.from_function(K, lambda x: np.ones(len(x)), grid)

    def check(self, tol: float = 1e-9):
        if abs(self.total() - 1.0) > tol:
            raise DensityError(f"density integrates to {self.total():.12g}, not 1")


def asa_density(K: ConvexBody, grid: SphereGrid | None = None) -> BoundaryDensity:
    """f_as = kappa^(1/(n+1)) / ∫ kappa^(1/(n+1)) dmu."""
    n = K.dim

    def fn(x):
        d = x - K.center
        rho = np.linalg.norm(d, axis=1)
        _, kap, _ = boundary_terms(K, K.center, d / rho[:, None])
        return kap ** (1.0 / (n + 1))

    dens = BoundaryDensity(K, fn, 1.0, grid or SphereGrid.default(n))
    x, mass = dens.boundary()
    tot = float(np.dot(mass, fn(x)))
    if tot <= 0:
        raise DensityError("affine surface area is zero; no affine density")
    dens.scale = 1.0 / tot
    return dens


def cosine_density(K: ConvexBody, amplitude: float, freq: int = 1, phase: float = 0.0,
                   grid: SphereGrid | None = None) -> BoundaryDensity:
    """f ∝ 1 + amplitude cos(freq theta + phase), theta the polar angle about the center."""
    if not 0 <= amplitude < 1:
        raise ParameterRangeError("amplitude must lie in [0, 1)")

    def fn(x):
        d = x - K.center
        th = np.arctan2(d[:, 1], d[:, 0])
        return 1 + amplitude * np.cos(freq * th + phase)

    return BoundaryDensity.from_function(K, fn, grid)


def _sampler_tables(dens: BoundaryDensity):
    """n = 2: (cdf, cell edges) in the polar angle; n = 3: rejection bound."""
    K = dens.K
    if K.dim == 2:
        x, mass = dens.boundary()
        ang = np.mod(np.arctan2(x[:, 1] - K.center[1], x[:, 0] - K.center[0]), 2 * np.pi)
        order = np.argsort(ang)
        a, p = ang[order], (dens(x) * mass)[order]
        # cell k is centred at a[k] and ends halfway to its neighbours (periodic)
        start = 0.5 * (a[-1] - 2 * np.pi + a[0])
        edges = np.concatenate([[start], 0.5 * (a[1:] + a[:-1]), [start + 2 * np.pi]])
        return np.concatenate([[0.0], np.cumsum(p)]), edges
    if K.dim == 3:
        g = SphereGrid.default(3)
        rho, _, nrm = boundary_terms(K, K.center, g.directions)
        jac = rho ** 2 / np.sum(g.directions * nrm, axis=1)
        pts_g = K.center + rho[:, None] * g.directions
        return 1.1 * float(np.max(dens(pts_g) * jac))
    raise DimensionUnsupportedError("boundary sampling is implemented for n in {2, 3}")


def sample_boundary(dens: BoundaryDensity, count: int, seed: int, key=()) -> np.ndarray:
    """Points of the boundary with law f dmu.

    n = 2: inverse CDF along the polar angle (piecewise-linear CDF on the
    grid, exact radial projection).  n = 3: rejection from radially projected
    uniform directions with acceptance f * Jacobian / max.
    """
    K = dens.K
    n = K.dim
    rng = stream(seed, 21, *key)
    key_ = ("sampler", dens.scale)
    if key_ not in dens._cache:
        dens.check()
        dens._cache[key_] = _sampler_tables(dens)
    table = dens._cache[key_]
    if n == 2:
        cdf, edges = table
        th = np.interp(rng.random(count) * cdf[-1], cdf, edges)
        xi = np.column_stack([np.cos(th), np.sin(th)])
        rho = boundary_terms(K, K.center, xi)[0]
        return K.center + rho[:, None] * xi
    if n == 3:
        bound = table
        out: list[np.ndarray] = []
        have = 0
        while have < count:
            m = 2 * (count - have) + 64
            d = rng.standard_normal((m, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r, _, nr = boundary_terms(K, K.center, d)
            pts = K.center + r[:, None] * d
            j = r ** 2 / np.sum(d * nr, axis=1)
            acc = rng.random(m) * bound < dens(pts) * j
            out.append(pts[acc])
            have += int(acc.sum())
        return np.vstack(out)[:count]
    raise DimensionUnsupportedError("boundary sampling is implemented for n in {2, 3}")


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def ranpol1_constant(n: int) -> float:
    """c_n in the interior random-polytope limit theorem."""
    return (2 * (ball_volume(n - 1) / (n + 1)) ** (2 / (n + 1))
            * (n + 3) * math.factorial(n + 1)
            / ((n * n + n + 2) * (n * n + 1) * gamma((n * n + 1) / (n + 1))))


def ranpol2_constant(n: int) -> float:
    """c_n in the boundary random-polytope limit theorem.

    The factor vol_{n-2}(∂B^{n-1}) is the counting measure of S^0 (= 2) when
    n = 2.
    """
    area = 2.0 if n == 2 else sphere_area(n - 1)
    return ((n - 1) ** ((n + 1) / (n - 1)) * gamma(n + 1 + 2 / (n - 1))
            / (2 * math.factorial(n + 1) * area ** (2 / (n - 1))))


def ranpol2_reference(dens: BoundaryDensity) -> float:
    """c_n ∫ kappa^(1/(n-1)) f^(-2/(n-1)) dmu."""
    K = dens.K
    n = K.dim
    x, mass = dens.boundary()
    xi = dens.grid.directions
    _, kap, _ = boundary_terms(K, K.center, xi)
    f = dens(x)
    return ranpol2_constant(n) * float(np.dot(mass, kap ** (1 / (n - 1)) * f ** (-2 / (n - 1))))


# ---------------------------------------------------------------------------
# deficit curves
# ---------------------------------------------------------------------------


@dataclass
class DeficitCurve:
    N: np.ndarray
    mean_deficit: np.ndarray
    stderr: np.ndarray
    replicates: int
    seed: int
    normalized: np.ndarray
    normalized_stderr: np.ndarray
    slope: float = float("nan")
    slope_stderr: float = float("nan")
    limit: float = float("nan")
    limit_stderr: float = float("nan")
    reference: float = float("nan")

    def to_bytes(self) -> bytes:
        arrs = [self.N, self.mean_deficit, self.stderr, self.normalized, self.normalized_stderr]
        tail = np.array([self.slope, self.slope_stderr, self.limit, self.limit_stderr])
        return b"".join(np.ascontiguousarray(a, dtype=float).tobytes() for a in arrs) + tail.tobytes()


def _fit(curve: DeficitCurve, exponent: float) -> DeficitCurve:
    """Weighted log-log slope and two-point extrapolation of the normalized values.

    ``exponent`` is the theoretical decay rate; the next-order correction is
    assumed proportional to N^-exponent relative to the leading term.
    """
    N = curve.N.astype(float)
    y = np.log(curve.mean_deficit)
    sy = curve.stderr / curve.mean_deficit
    w = 1.0 / np.maximum(sy, 1e-12) ** 2
    X = np.column_stack([np.ones_like(N), np.log(N)])
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    curve.slope = float(beta[1])
    curve.slope_stderr = float(math.sqrt(cov[1, 1]))
    x = N ** (-exponent)
    (x1, x2), (L1, L2) = x[-2:], curve.normalized[-2:]
    s1, s2 = curve.normalized_stderr[-2:]
    curve.limit = float((L2 * x1 - L1 * x2) / (x1 - x2))
    curve.limit_stderr = float(math.hypot(s2 * x1, s1 * x2) / abs(x1 - x2))
    return curve


def _curve(deficits: np.ndarray, N_list, replicates: int, seed: int, scale: np.ndarray):
    means, ses = [], []
    for k in range(len(N_list)):
        m, s = mean_and_stderr(deficits[:, k])
        means.append(m)
        ses.append(s)
    means = np.array(means)
    ses = np.array(ses)
    return DeficitCurve(np.asarray(N_list), means, ses, replicates, seed, means * scale, ses * scale)


def _nested_deficits(sampler: Callable, vol: float, N_list, replicates: int, workers: int):
    N_list = sorted(int(N) for N in N_list)

    def one(r):
        pts = sampler(r, N_list[-1])
        return [vol - hull_volume(pts[:N]) for N in N_list]

    return np.array(pmap(one, list(range(replicates)), workers))


def ranpol1_estimate(K: ConvexBody, N_list=DEFAULT_N, replicates: int = 2000, seed: int = 0,
                     workers: int = 1, reference: float | None = None) -> DeficitCurve:
    """c_n (vol K - E(K, N)) / (vol K / N)^(2/(n+1)) for uniform interior points."""
    n = K.dim
    if n not in (2, 3):
        raise DimensionUnsupportedError("random polytopes are simulated for n in {2, 3}")
    N_list = sorted(int(N) for N in N_list)
    vol = K.volume()

    def sampler(r, N):
        return sample_interior(K, N, seed, key=(r,))[0]

    D = _nested_deficits(sampler, vol, N_list, replicates, workers)
    scale = ranpol1_constant(n) * (np.asarray(N_list, dtype=float) / vol) ** (2 / (n + 1))
    curve = _fit(_curve(D, N_list, replicates, seed, scale), 2 / (n + 1))
    curve.reference = affine_surface_area(K).value if reference is None else reference
    return curve


def ranpol2_estimate(dens: BoundaryDensity, N_list=DEFAULT_N, replicates: int = 2000,
                     seed: int = 0, workers: int = 1) -> DeficitCurve:
    """(vol K - E(f, N)) N^(2/(n-1)) for boundary points drawn from f dmu."""
    K = dens.K
    n = K.dim
    N_list = sorted(int(N) for N in N_list)
    vol = K.volume()

    def sampler(r, N):
        return sample_boundary(dens, N, seed, key=(r,))

    D = _nested_deficits(sampler, vol, N_list, replicates, workers)
    scale = np.asarray(N_list, dtype=float) ** (2 / (n - 1))
    curve = _fit(_curve(D, N_list, replicates, seed, scale), 2 / (n - 1))
    curve.reference = ranpol2_reference(dens)
    return curve


@dataclass
class DensityComparison:
    labels: list[str]
    curves: list[DeficitCurve]

    @property
    def limits(self) -> np.ndarray:
        return np.array([c.limit for c in self.curves])

    @property
    def references(self) -> np.ndarray:
        return np.array([c.reference for c in self.curves])


def compare_densities(densities: dict, N_list=DEFAULT_N, replicates: int = 500, seed: int = 0,
                      workers: int = 1) -> DensityComparison:
    """RanPol2 curves for several densities on one body with common random numbers.

    Every density sees the same uniform variates (same seed and replicate
    keys), so differences between fitted limits are paired.
    """
    labels = list(densities)
    curves = [ranpol2_estimate(densities[k], N_list, replicates, seed, workers) for k in labels]
    return DensityComparison(labels, curves)


def triangle_check(replicates: int = 20000, seed: int = 0) -> tuple[float, float, float]:
    """(mean hull area of 3 uniform points, stderr, area/12) for a triangle."""
    T = VPolytope([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rng = stream(seed, 61)
    # uniform points in the triangle by folding the unit square
    u = rng.random((replicates, 3, 2))
    flip = u.sum(axis=2) > 1
    u[flip] = 1 - u[flip]
    a, b, c = u[:, 0], u[:, 1], u[:, 2]
    areas = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                         - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    m, s = mean_and_stderr(areas)
    return m, s, T.volume() / 12


# ---------------------------------------------------------------------------
# best approximation of the disk
# ---------------------------------------------------------------------------


@dataclass
class BestApprox:
    N: np.ndarray
    deficit: np.ndarray
    del1: np.ndarray


def disk_best_approx(N_list) -> BestApprox:
    """Inscribed regular N-gon deficits pi - (N/2) sin(2 pi / N) and the del_1 estimates."""
    N = np.asarray(N_list, dtype=float)
    if np.any(N < 3):
        raise ParameterRangeError("need N >= 3")
    deficit = 0.5 * N * _x_minus_sin(2 * np.pi / N)
    del1 = 2 * N ** 2 * deficit / (2 * np.pi) ** 3
    return BestApprox(N, deficit, del1)
