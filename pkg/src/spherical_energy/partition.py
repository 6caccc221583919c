"""Recursive zonal equal-area partitions of S^d.

A cell on S^m is a colatitude interval times a cell on S^(m-1) (or the whole
of S^(m-1) for polar caps and single-cell collars).  On S^1 a cell is an arc
of longitudes.  The product structure gives exact areas, exact uniform
sampling and closed-form diameters.

Points are written as ``x = (sin(theta) * u, cos(theta))`` with ``u`` on
S^(m-1); the north pole is the last coordinate axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .geometry import Cap, PointSet, cap_area, cap_radius, sphere_area

__all__ = [
    "Cell",
    "Partition",
    "InnerCap",
    "eq_partition",
    "cell_area",
    "cell_sample",
    "cell_diameter",
    "cell_contains",
    "inner_cap",
    "dump_partition",
    "load_partition",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Cell:
    """One cell of a partition of S^dim.

    ``lo, hi`` are colatitudes for ``dim >= 2`` and longitudes for ``dim == 1``.
    ``base`` is ``None`` when the cell spans the whole of S^(dim-1).
    """

    dim: int
    lo: float
    hi: float
    base: "Cell | None" = None
    index: int = 0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"degenerate cell interval [{self.lo}, {self.hi}]")

    def index_path(self) -> tuple[int, ...]:
        path = [self.index]
        b = self.base
        while b is not None:
            path.append(b.index)
            b = b.base
        return tuple(path)

    def intervals(self) -> np.ndarray:
        """Per-level bounds, shape ``(dim, 2)``; level ``k`` lives on S^(dim-k)."""
        out = np.empty((self.dim, 2))
        c: Cell | None = self
        for k in range(self.dim):
            m = self.dim - k
            if c is None:
                out[k] = (0.0, TWO_PI if m == 1 else math.pi)
            else:
                out[k] = (c.lo, c.hi)
                c = c.base
        return out


@dataclass(frozen=True)
class InnerCap:
    cap: Cap
    scaled_radius: float


def _level_cdf(m: int, theta):
    """Normalised measure of the colatitude band [0, theta] on S^m (or the arc on S^1)."""
    if m == 1:
        return np.asarray(theta) / TWO_PI
    return cap_area(m, theta)


def _level_inverse(m: int, u):
    if m == 1:
        return np.asarray(u) * TWO_PI
    return cap_radius(m, u)


def cell_area(cell: Cell, d: int | None = None) -> float:
    """Exact normalised measure from the product structure."""
    if d is not None and d != cell.dim:
        raise ValueError(f"cell lives on S^{cell.dim}, not S^{d}")
    area = 1.0
    for k, (lo, hi) in enumerate(cell.intervals()):
        m = cell.dim - k
        area *= float(_level_cdf(m, hi) - _level_cdf(m, lo))
    return area


def _sample_levels(bounds: np.ndarray, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples for cells given as bounds of shape ``(n, d, 2)``."""
    n = bounds.shape[0]
    u = rng.random((n, d))
    angles = np.empty((n, d))
    for k in range(d):
        m = d - k
        lo, hi = bounds[:, k, 0], bounds[:, k, 1]
        if m == 1:
            angles[:, k] = lo + u[:, k] * (hi - lo)
            continue
        a_lo = _level_cdf(m, lo)
        a_hi = _level_cdf(m, hi)
        target = a_lo + u[:, k] * (a_hi - a_lo)
        angles[:, k] = np.clip(_level_inverse(m, np.clip(target, 0.0, 1.0)), lo, hi)
    return _angles_to_cartesian(angles)


def _angles_to_cartesian(angles: np.ndarray) -> np.ndarray:
    n, d = angles.shape
    phi = angles[:, d - 1]
    x = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    for k in range(d - 2, -1, -1):
        th = angles[:, k]
        x = np.concatenate([np.sin(th)[:, None] * x, np.cos(th)[:, None]], axis=1)
    return x


def _cartesian_to_angles(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, dim1 = x.shape
    d = dim1 - 1
    angles = np.empty((n, d))
    cur = x
    for k in range(d - 1):
        r = np.linalg.norm(cur, axis=1)
        last = np.clip(cur[:, -1] / np.where(r > 0, r, 1.0), -1.0, 1.0)
        angles[:, k] = np.arccos(last)
        cur = cur[:, :-1]
    angles[:, d - 1] = np.mod(np.arctan2(cur[:, 1], cur[:, 0]), TWO_PI)
    return angles


def cell_sample(cell: Cell, d: int | None, rng, size: int | None = None) -> np.ndarray:
    """Uniform point(s) from ``cell`` using the caller's random stream.

    Returns shape ``(d+1,)``, or ``(size, d+1)`` when ``size`` is given.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dim = cell.dim if d is None else d
    if dim != cell.dim:
        raise ValueError(f"cell lives on S^{cell.dim}, not S^{dim}")
    n = 1 if size is None else size
    out = _sample_levels(np.broadcast_to(cell.intervals(), (n, dim, 2)), dim, rng)
    return out[0] if size is None else out


def _in_bounds(angles: np.ndarray, bounds: np.ndarray, tol: float) -> np.ndarray:
    """Membership of angle vectors in per-level bounds, broadcasting over rows."""
    d = angles.shape[-1]
    ok = np.True_
    full_below = np.False_
    for k in range(d):
        m = d - k
        lo, hi = bounds[..., k, 0], bounds[..., k, 1]
        a = angles[..., k]
        if m == 1:
            span = hi - lo
            rel = np.mod(a - lo + tol, TWO_PI) - tol
            inside = (span >= TWO_PI - tol) | (rel <= span + tol)
        else:
            inside = (a >= lo - tol) & (a <= hi + tol)
        # at a pole the remaining coordinates are undefined
        ok = ok & (inside | full_below)
        if m > 1:
            full_below = full_below | (np.abs(np.sin(a)) < tol)
    return ok


def cell_contains(cell: Cell, x, tol: float = 1e-12) -> np.ndarray:
    ang = _cartesian_to_angles(x)
    return _in_bounds(ang, cell.intervals()[None], tol)


def _min_inner_product(cell: Cell | None, dim: int) -> float:
    """Minimum of <x, y> over x, y in the cell (``None`` means all of S^dim)."""
    if cell is None:
        return -1.0
    if dim == 1:
        w = cell.hi - cell.lo
        return -1.0 if w >= math.pi else math.cos(w)
    m = _min_inner_product(cell.base, dim - 1)
    p, q = 0.5 * (1 + m), 0.5 * (1 - m)
    lo, hi = cell.lo, cell.hi
    # <x,y> = p cos(th - th') + q cos(th + th'); for fixed b = th + th' the
    # minimum takes |th - th'| as large as the box allows
    best = math.inf
    for c, b0, b1 in ((2 * lo, 2 * lo, lo + hi), (2 * hi, lo + hi, 2 * hi)):
        A = p * math.cos(c) + q
        B = p * math.sin(c)
        cands = [b0, b1]
        phase = math.atan2(B, A) + math.pi
        k0 = math.floor((b0 - phase) / TWO_PI)
        for k in (k0, k0 + 1, k0 + 2):
            b = phase + k * TWO_PI
            if b0 <= b <= b1:
                cands.append(b)
        for b in cands:
            best = min(best, A * math.cos(b) + B * math.sin(b))
    return best


def cell_diameter(cell: Cell, d: int | None = None) -> float:
    """Largest chordal distance between two points of the cell."""
    g = _min_inner_product(cell, cell.dim)
    return math.sqrt(max(0.0, 2.0 - 2.0 * g))


def _inner(cell: Cell | None, dim: int) -> tuple[np.ndarray, float]:
    """Centre (in R^(dim+1)) and radius of a cap inside the cell."""
    if dim == 1:
        if cell is None:
            return np.array([1.0, 0.0]), math.pi
        mid = 0.5 * (cell.lo + cell.hi)
        return np.array([math.cos(mid), math.sin(mid)]), 0.5 * (cell.hi - cell.lo)
    north = np.zeros(dim + 1)
    north[-1] = 1.0
    if cell is None:
        return north, math.pi
    lo, hi = cell.lo, cell.hi
    if cell.base is None:
        if lo == 0.0:
            return north, hi
        if hi == math.pi:
            return -north, math.pi - lo
        u_c = np.zeros(dim)
        u_c[0] = 1.0
        r = 0.5 * (hi - lo)
    else:
        u_c, r_base = _inner(cell.base, dim - 1)
        mid = 0.5 * (lo + hi)
        r = min(0.5 * (hi - lo), math.asin(math.sin(mid) * math.sin(min(r_base, 0.5 * math.pi))))
    mid = 0.5 * (lo + hi)
    center = np.concatenate([math.sin(mid) * u_c, [math.cos(mid)]])
    return center / np.linalg.norm(center), r


def inner_cap(cell: Cell, d: int | None = None, N: int | None = None) -> InnerCap:
    """Cap centred at the cell's angular midpoint that fits inside the cell.

    ``scaled_radius`` is ``radius * N^(1/d)``; it is NaN when ``N`` is not given.
    """
    dim = cell.dim
    if cell.hi - cell.lo <= 0:
        raise ValueError("degenerate cell")
    center, r = _inner(cell, dim)
    if r <= 0:
        raise ValueError("degenerate cell: no inner cap")
    scaled = r * N ** (1.0 / dim) if N else float("nan")
    return InnerCap(Cap(center, min(r, math.pi)), scaled)


# -- construction -----------------------------------------------------------

def _round_to_naturals(ideal: list[float]) -> list[int]:
    counts = []
    carry = 0.0
    for r in ideal:
        n = int(round(r + carry))
        carry += r - n
        counts.append(n)
    return counts


def _caps(dim: int, N: int) -> tuple[list[float], list[int]]:
    """Colatitudes of the zone boundaries and the number of cells per zone."""
    if N == 1:
        return [math.pi], [1]
    if N == 2:
        return [0.5 * math.pi, math.pi], [1, 1]
    ideal_area = sphere_area(dim) / N
    c_polar = cap_radius(dim, 1.0 / N)
    ideal_angle = ideal_area ** (1.0 / dim)
    n_collars = max(1, int(round((math.pi - 2 * c_polar) / ideal_angle)))
    fitting = (math.pi - 2 * c_polar) / n_collars
    ideal = [1.0]
    for k in range(n_collars):
        a = cap_area(dim, c_polar + (k + 1) * fitting) - cap_area(dim, c_polar + k * fitting)
        ideal.append(a * N)
    ideal.append(1.0)
    counts = _round_to_naturals(ideal)
    caps = [c_polar]
    subtotal = 1
    for k in range(n_collars):
        subtotal += counts[k + 1]
        caps.append(cap_radius(dim, subtotal / N))
    caps.append(math.pi)
    return caps, counts


def _regions(dim: int, N: int) -> list[Cell]:
    if dim == 1:
        return [Cell(1, TWO_PI * k / N, TWO_PI * (k + 1) / N, None, k) for k in range(N)]
    if N == 1:
        return [Cell(dim, 0.0, math.pi, None, 0)]
    caps, counts = _caps(dim, N)
    cells = [Cell(dim, 0.0, caps[0], None, 0)]
    for z in range(1, len(counts) - 1):
        lo, hi, n_in = caps[z - 1], caps[z], counts[z]
        if n_in == 0:
            continue
        if n_in == 1:
            cells.append(Cell(dim, lo, hi, None, len(cells)))
            continue
        for sub in _regions(dim - 1, n_in):
            cells.append(Cell(dim, lo, hi, sub, len(cells)))
    cells.append(Cell(dim, caps[-2], math.pi, None, len(cells)))
    return cells


class Partition:
    """Area-regular partition of S^d into ``N`` cells."""

    def __init__(self, d: int, N: int, cells: list[Cell]):
        if len(cells) != N:
            raise ValueError(f"expected {N} cells, got {len(cells)}")
        self.d = d
        self.N = N
        self.cells = tuple(cells)
        bounds = np.stack([c.intervals() for c in cells])
        bounds.setflags(write=False)
        self.bounds = bounds

    def __len__(self) -> int:
        return self.N

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    def areas(self) -> np.ndarray:
        return np.array([cell_area(c) for c in self.cells])

    def diameters(self) -> np.ndarray:
        return np.array([cell_diameter(c) for c in self.cells])

    def inner_caps(self) -> list[InnerCap]:
        return [inner_cap(c, self.d, self.N) for c in self.cells]

    def sample(self, rng) -> np.ndarray:
        """One uniform point per cell, in cell order."""
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return _sample_levels(self.bounds, self.d, rng)

    def sample_pointset(self, rng) -> PointSet:
        return PointSet.from_array(self.sample(rng), label=f"jittered(d={self.d}, N={self.N})")

    def locate(self, x, tol: float = 1e-12) -> np.ndarray:
        """Index of the first cell containing each row of ``x`` (-1 if none)."""
        ang = _cartesian_to_angles(x)
        inside = _in_bounds(ang[:, None, :], self.bounds[None], tol)
        idx = np.argmax(inside, axis=1)
        return np.where(inside.any(axis=1), idx, -1)


def eq_partition(d: int, N: int) -> Partition:
    """Recursive zonal equal-area partition of S^d into ``N`` cells.

    Polar caps are single cells; collar cell counts are rounded to integers
    while carrying the area remainder to the next collar, and each collar is
    split by recursing on S^(d-1).
    """
    if d < 1:
        raise ValueError("d must be positive")
    if N < 1:
        raise ValueError("N must be positive")
    return Partition(d, N, _regions(d, N))


def dump_partition(part: Partition) -> str:
    """One line per cell: dotted index path, then ``lo hi`` per level."""
    lines = [f"# eq_partition d={part.d} N={part.N}"]
    for cell in part.cells:
        path = ".".join(str(i) for i in cell.index_path())
        levels = "  ".join(f"{lo:.17g} {hi:.17g}" for lo, hi in cell.intervals())
        lines.append(f"{path}  {levels}")
    return "\n".join(lines) + "\n"


def load_partition(text: str) -> Partition:
    header, *rows = [ln for ln in text.splitlines() if ln.strip()]
    fields = dict(tok.split("=") for tok in header.split()[2:])
    d, N = int(fields["d"]), int(fields["N"])
    cells = []
    for row in rows:
        tok = row.split()
        path = [int(i) for i in tok[0].split(".")]
        vals = [float(v) for v in tok[1:]]
        ivals = [(vals[2 * k], vals[2 * k + 1]) for k in range(d)]
        cells.append(_cell_from_levels(d, ivals, path))
    return Partition(d, N, cells)


def _cell_from_levels(dim: int, ivals, path) -> Cell:
    lo, hi = ivals[0]
    base = _cell_from_levels(dim - 1, ivals[1:], path[1:]) if len(path) > 1 else None
    return Cell(dim, lo, hi, base, path[0])
