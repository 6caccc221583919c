"""Points on S^d, chordal distances and spherical caps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaincinv, gammaln

__all__ = [
    "PointSet",
    "Cap",
    "chordal_distance",
    "cap_area",
    "cap_radius",
    "sphere_area",
    "alpha_n",
    "alpha_n_bounds",
    "uniform_sphere",
    "random_rotation",
    "UNIT_NORM_TOL",
]

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class PointSet:
    """``N`` unit vectors in R^(d+1).

    The coordinate array is copied and made read-only on construction.
    """

    d: int
    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[None, :]
        if self.d < 1:
            raise ValueError("d must be positive")
        if pts.ndim != 2 or pts.shape[1] != self.d + 1:
            raise ValueError(f"expected an (N, {self.d + 1}) array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("a point set needs at least one point")
        dev = np.abs(np.linalg.norm(pts, axis=1) - 1.0)
        if dev.max() > UNIT_NORM_TOL:
            raise ValueError(f"points are not unit vectors (max norm deviation {dev.max():.3g})")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_array(cls, points, label: str = "") -> "PointSet":
        """Normalise the rows of ``points`` and infer ``d`` from the column count."""
        pts = np.asarray(points, dtype=float)
        pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        return cls(pts.shape[1] - 1, pts, label)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.N

    def rotated(self, Q: np.ndarray) -> "PointSet":
        return PointSet.from_array(self.points @ np.asarray(Q).T, self.label)


@dataclass(frozen=True)
class Cap:
    center: np.ndarray
    angular_radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > UNIT_NORM_TOL:
            raise ValueError("cap centre must be a unit vector")
        if not 0.0 <= self.angular_radius <= math.pi:
            raise ValueError("angular radius must lie in [0, pi]")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        ang = np.arccos(np.clip(x @ self.center, -1.0, 1.0))
        return ang <= self.angular_radius + tol


def chordal_distance(x, y) -> float:
    """``|x - y| = sqrt(2 - 2 <x, y>)`` for unit vectors, clamped to [0, 2].

    The difference form is used because the inner-product form loses all
    digits for nearly coincident points.
    """
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return min(float(np.linalg.norm(diff)), 2.0)


def sphere_area(d: int) -> float:
    """Unnormalised surface area of S^d."""
    return 2.0 * math.pi ** ((d + 1) / 2) / math.exp(gammaln((d + 1) / 2))


def cap_area(d: int, phi):
    """Normalised area of a cap of angular radius ``phi`` on S^d.

    The inner product with the cap centre is Beta(d/2, d/2) distributed after
    the map ``t -> (1 - t)/2``, so the area is a regularised incomplete beta.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any((phi < 0) | (phi > math.pi)):
        raise ValueError("phi must lie in [0, pi]")
    a = d / 2
    lower = betainc(a, a, np.sin(phi / 2) ** 2)
    upper = 1.0 - betainc(a, a, np.cos(phi / 2) ** 2)
    out = np.where(phi <= math.pi / 2, lower, upper)
    return float(out) if out.ndim == 0 else out


def cap_radius(d: int, area):
    """Inverse of :func:`cap_area`."""
    area = np.asarray(area, dtype=float)
    if np.any((area < 0) | (area > 1)):
        raise ValueError("area must lie in [0, 1]")
    a = d / 2
    small = 2.0 * np.arcsin(np.sqrt(betaincinv(a, a, np.minimum(area, 0.5))))
    large = math.pi - 2.0 * np.arcsin(np.sqrt(betaincinv(a, a, np.minimum(1.0 - area, 0.5))))
    out = np.where(area <= 0.5, small, large)
    return float(out) if out.ndim == 0 else out


def alpha_n(c1: float, N: int, d: int) -> float:
    """Angular radius of a cap that holds at most one point of a ``c1``-separated set."""
    arg = 1.0 - c1 * c1 / (8.0 * N ** (2.0 / d))
    if arg < -1.0:
        raise ValueError(f"arccos argument {arg} below -1")
    return math.acos(arg)


def alpha_n_bounds(c1: float, N: int, d: int) -> tuple[float, float]:
    """Bracket ``(sin a, (pi/2) sin a)`` for ``a = alpha_n``; it encloses ``a`` when ``a <= pi/2``."""
    root = math.sqrt(1.0 - c1 * c1 / (16.0 * N ** (2.0 / d)))
    base = c1 / N ** (1.0 / d)
    return 0.5 * root * base, 0.25 * math.pi * root * base


def uniform_sphere(d: int, N: int, seed=None) -> PointSet:
    """``N`` independent uniform points from normalised Gaussian vectors."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal((N, d + 1))
    return PointSet.from_array(g, label=f"uniform(d={d}, N={N})")


def random_rotation(dim: int, seed=None) -> np.ndarray:
    """Haar-distributed orthogonal matrix of size ``dim``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))
