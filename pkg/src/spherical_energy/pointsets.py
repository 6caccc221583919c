"""Point-set sources: fixtures, spiral points, text files and a Riesz-energy minimiser."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .geometry import PointSet

__all__ = [
    "PointFileError",
    "SeparationReport",
    "MinimizeResult",
    "load_points",
    "save_points",
    "fixture",
    "FIXTURES",
    "cross_polytope",
    "simplex",
    "fibonacci_sphere",
    "separation",
    "riesz_minimize",
]

FILE_NORM_TOL = 1e-6
DUPLICATE_TOL = 1e-14


class PointFileError(ValueError):
    """A point file that cannot be parsed or holds non-unit rows."""


def load_points(path, d: Optional[int] = None) -> PointSet:
    """Read whitespace-separated coordinates, one point per row, ``#`` comments.

    Rows within ``1e-6`` of unit norm are renormalised; anything further off
    is rejected.
    """
    path = Path(path)
    try:
        arr = np.loadtxt(path, comments="#", ndmin=2, dtype=float)
    except ValueError as exc:
        raise PointFileError(f"{path}: {exc}") from exc
    if arr.size == 0:
        raise PointFileError(f"{path}: no points")
    if d is not None and arr.shape[1] != d + 1:
        raise PointFileError(f"{path}: expected {d + 1} columns, found {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise PointFileError(f"{path}: non-finite coordinates")
    norms = np.linalg.norm(arr, axis=1)
    bad = np.abs(norms - 1.0) > FILE_NORM_TOL
    if np.any(bad):
        row = int(np.argmax(bad))
        raise PointFileError(f"{path}: row {row} has norm {norms[row]:.9g}")
    # rows already unit to rounding are kept bit-for-bit
    scale = np.where(np.abs(norms - 1.0) > 4 * np.finfo(float).eps, norms, 1.0)
    return PointSet(arr.shape[1] - 1, arr / scale[:, None], label=path.name)


def save_points(path, points: PointSet, header: str = "") -> None:
    lines = [f"d={points.d} N={points.N}"]
    if points.label:
        lines.append(points.label)
    if header:
        lines.extend(header.splitlines())
    np.savetxt(path, points.points, fmt="%.17g", header="\n".join(lines))


# -- fixtures ---------------------------------------------------------------

def cross_polytope(d: int) -> PointSet:
    """The ``2(d + 1)`` points ``+-e_i``."""
    eye = np.eye(d + 1)
    return PointSet(d, np.vstack([eye, -eye]), label=f"cross_polytope(d={d})")


def simplex(d: int) -> PointSet:
    """Vertices of the regular simplex inscribed in S^d (``d + 2`` points)."""
    n = d + 2
    centred = np.eye(n) - 1.0 / n
    # orthonormal basis of the hyperplane orthogonal to (1, ..., 1)
    q, _ = np.linalg.qr(centred[:, : n - 1])
    pts = centred @ q
    return PointSet.from_array(pts, label=f"simplex(d={d})")


def _cube() -> PointSet:
    corners = np.array([[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)], dtype=float)
    return PointSet.from_array(corners, label="cube")


def _icosahedron() -> PointSet:
    phi = (1 + math.sqrt(5)) / 2
    pts = []
    for a in (-1, 1):
        for b in (-phi, phi):
            pts += [(0, a, b), (a, b, 0), (b, 0, a)]
    return PointSet.from_array(np.array(pts, dtype=float), label="icosahedron")


FIXTURES = {
    "octahedron": lambda: PointSet(2, cross_polytope(2).points, label="octahedron"),
    "cube": _cube,
    "icosahedron": _icosahedron,
}


def fixture(name: str, d: Optional[int] = None) -> PointSet:
    """Named configuration: octahedron, cube, icosahedron, cross_polytope or simplex."""
    if name in FIXTURES:
        return FIXTURES[name]()
    if name in ("cross_polytope", "simplex"):
        if d is None:
            raise ValueError(f"{name} needs a dimension")
        return cross_polytope(d) if name == "cross_polytope" else simplex(d)
    raise ValueError(f"unknown fixture {name!r}")


def fibonacci_sphere(N: int) -> PointSet:
    """Spherical Fibonacci spiral on S^2 (equal-area latitudes, golden-angle longitudes)."""
    if N < 1:
        raise ValueError("N must be positive")
    i = np.arange(N, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / N
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    phi = 2.0 * math.pi * np.mod(i / golden, 1.0)
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return PointSet.from_array(pts, label=f"fibonacci(N={N})")


# -- separation -------------------------------------------------------------

@dataclass(frozen=True)
class SeparationReport:
    min_distance: float
    c1_hat: float
    argmin_pair: tuple[int, int]


def separation(points: PointSet) -> SeparationReport:
    """Minimum chordal distance and the scaled constant ``min_dist * N^(1/d)``."""
    N, d = points.N, points.d
    if N < 2:
        raise ValueError("separation needs at least two points")
    tree = cKDTree(points.points)
    dist, idx = tree.query(points.points, k=2)
    i = int(np.argmin(dist[:, 1]))
    # with duplicates the tree may list a point as its own second neighbour
    j = int(idx[i, 1]) if idx[i, 1] != i else int(idx[i, 0])
    dmin = float(dist[i, 1])
    if dmin < DUPLICATE_TOL:
        warnings.warn(f"points {i} and {j} coincide", RuntimeWarning, stacklevel=2)
    return SeparationReport(dmin, dmin * N ** (1.0 / d), (min(i, j), max(i, j)))


# -- Riesz energy minimiser -------------------------------------------------

@dataclass
class MinimizeResult:
    points: PointSet
    energies: list[float] = field(default_factory=list)
    steps: int = 0
    step_size: float = 0.0


def _energy_and_grad(X: np.ndarray, s: float, want_grad: bool = True, block: int = 512):
    N = X.shape[0]
    grad = np.zeros_like(X) if want_grad else None
    parts = []
    for i0 in range(0, N, block):
        i1 = min(i0 + block, N)
        r = cdist(X[i0:i1], X)
        rows = np.arange(i1 - i0)
        r[rows, rows + i0] = np.inf
        if r.min() < DUPLICATE_TOL:
            raise ValueError("coincident points in Riesz minimisation")
        rs = r ** (-s)
        parts.append(float(np.sum(rs)))
        if want_grad:
            w = rs / (r * r)
            # d/dx_i of sum_j |x_i - x_j|^-s
            grad[i0:i1] = -s * (X[i0:i1] * w.sum(axis=1)[:, None] - w @ X)
    energy = 0.5 * math.fsum(parts)
    return energy, grad


def riesz_minimize(
    start: PointSet,
    s: float,
    steps: int = 100,
    step_size: Optional[float] = None,
    max_halvings: int = 40,
) -> MinimizeResult:
    """Projected gradient descent on the Riesz s-energy, renormalising after each step.

    A step that raises the energy is retried with half the step size, so the
    recorded energies never increase.  Accepted steps grow the step by 10%.
    """
    if not 0 < s:
        raise ValueError("s must be positive")
    X = np.array(start.points)
    E, g = _energy_and_grad(X, s)
    energies = [E]
    if step_size is None:
        sep = separation(start).min_distance
        tg = g - np.sum(g * X, axis=1)[:, None] * X
        step_size = 0.1 * sep / max(np.abs(tg).max(), 1e-300)
    eta = step_size
    taken = 0
    for _ in range(steps):
        tg = g - np.sum(g * X, axis=1)[:, None] * X
        if not np.any(tg):
            break
        for _ in range(max_halvings):
            Y = X - eta * tg
            Y /= np.linalg.norm(Y, axis=1, keepdims=True)
            try:
                E_new, _ = _energy_and_grad(Y, s, want_grad=False)
            except ValueError:
                E_new = math.inf
            if E_new <= E:
                break
            eta *= 0.5
        else:
            break
        X = Y
        E, g = _energy_and_grad(X, s)
        energies.append(E)
        taken += 1
        eta *= 1.1
    label = f"riesz_min(s={s}, N={start.N})"
    return MinimizeResult(PointSet(start.d, X, label=label), energies, taken, eta)
