"""Direction sets on the unit sphere with quadrature weights."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def sphere_area(n: int) -> float:
    """(n-1)-dimensional measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n: int) -> float:
    """Volume of the Euclidean unit ball in R^n (1 for n = 0)."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class SphereGrid:
    """Directions on S^{n-1} with positive weights summing to the sphere area.

    The direction set is always closed under negation.
    """

    directions: np.ndarray
    weights: np.ndarray
    kind: str = "custom"
    # (source grid, matrix) for grids built by ``pushforward``
    source: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if d.ndim != 2 or w.shape != (d.shape[0],):
            raise ValueError("directions must be (N, n) and weights (N,)")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return self.directions.shape[0]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @classmethod
    def circle(cls, n_points: int = 4096, graded: bool = False) -> "SphereGrid":
        """Directions on S^1.

        With ``graded=False`` these are ``n_points`` equally spaced angles.
        With ``graded=True`` each quadrant is mapped through a sin^3 (Sidi)
        change of variables, which clusters nodes at the coordinate axes and
        restores fast convergence of the trapezoid rule for integrands with
        algebraic singularities there (e.g. curvature of l_p balls).
        """
        if n_points % 4:
            raise ValueError("n_points must be a multiple of 4")
        if not graded:
            theta = 2.0 * math.pi * np.arange(n_points) / n_points
            w = np.full(n_points, 2.0 * math.pi / n_points)
        else:
            m = n_points // 4
            s = (np.arange(m) + 0.5) / m
            # Sidi sin^3 transform on [0, 1]; psi' ~ s^3 at both ends
            psi = 9.0 / 16.0 * (1 - np.cos(np.pi * s)) - (1 - np.cos(3 * np.pi * s)) / 16.0
            dpsi = 0.75 * np.pi * np.sin(np.pi * s) ** 3
            quarter = 0.5 * math.pi * psi
            wq = 0.5 * math.pi * dpsi / m
            theta = np.concatenate([quarter + k * 0.5 * math.pi for k in range(4)])
            w = np.tile(wq, 4)
        d = np.column_stack([np.cos(theta), np.sin(theta)])
        return cls(d, w, "circle-graded" if graded else "circle")

    @classmethod
    def fibonacci(cls, n_points: int = 8192) -> "SphereGrid":
        """Antipodally symmetric Fibonacci lattice on S^2 with equal weights."""
        if n_points % 2:
            raise ValueError("n_points must be even")
        half = n_points // 2
        k = np.arange(half) + 0.5
        z = 1.0 - k / half  # upper hemisphere only, z in (0, 1)
        golden = (1.0 + 5.0 ** 0.5) / 2.0
        phi = 2.0 * math.pi * k / golden
        r = np.sqrt(1.0 - z * z)
        up = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        d = np.vstack([up, -up])
        w = np.full(n_points, 4.0 * math.pi / n_points)
        return cls(d, w, "fibonacci")

    @classmethod
    def random(cls, dim: int, n_points: int, seed: int = 0) -> "SphereGrid":
        """Symmetrized Gaussian directions, equal weights (any dimension)."""
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((n_points // 2, dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        d = np.vstack([g, -g])
        w = np.full(d.shape[0], sphere_area(dim) / d.shape[0])
        return cls(d, w, f"random:{seed}")

    @classmethod
    def default(cls, dim: int, n_points: int | None = None) -> "SphereGrid":
        if dim == 2:
            return cls.circle(n_points or 4096)
        if dim == 3:
            return cls.fibonacci(n_points or 8192)
        return cls.random(dim, n_points or 20000)

    def pushforward(self, matrix) -> "SphereGrid":
        """Image directions T u / |T u| with weights |det T| / |T u|^n.

        Integrating a function of the image direction over this grid equals
        integrating it over the sphere (change of variables), while the nodes
        follow the elongation of T.
        """
        T = np.asarray(matrix, dtype=float)
        v = self.directions @ T.T
        r = np.linalg.norm(v, axis=1)
        w = self.weights * abs(np.linalg.det(T)) / r ** self.dim
        return SphereGrid(v / r[:, None], w, "pushforward", (self, T))

    def coarsen(self) -> "SphereGrid | None":
        """Same construction at half the size (None for hand-made grids)."""
        if self.source is not None:
            base = self.source[0].coarsen()
            return None if base is None else base.pushforward(self.source[1])
        half = len(self) // 2
        if self.kind == "circle":
            return SphereGrid.circle(half - half % 4)
        if self.kind == "circle-graded":
            return SphereGrid.circle(half - half % 4, graded=True)
        if self.kind == "fibonacci":
            return SphereGrid.fibonacci(half - half % 2)
        if self.kind.startswith("random:"):
            return SphereGrid.random(self.dim, half, int(self.kind.split(":")[1]))
        return None
