"""Design defects and worst-case cubature errors in Sobolev and log-weighted spaces."""
from __future__ import annotations

import json
import math
import threading
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .energy import KernelSpec, coefficient_kernel, kernel_energy
from .geometry import PointSet
from .specfun import legendre_pnd_all, zdim

__all__ = [
    "DesignCertificate",
    "WceResult",
    "design_defect",
    "zdim_float",
    "sobolev_weights",
    "logspace_weights",
    "logspace_norm_weights",
    "series_tail",
    "series_total",
    "sobolev_kernel",
    "logspace_kernel",
    "wce_sobolev",
    "wce_logspace",
    "DEFAULT_TOL",
    "MAX_DEGREE",
]

DEFAULT_TOL = 1e-10
# cap on the truncation degree of the kernel double sum; the diagonal always
# uses the full series, so the cap only affects close off-diagonal pairs
MAX_DEGREE = 4096
_MIN_DEGREE = 16
_DIRECT_SUM_DEGREE = 4096


@dataclass
class DesignCertificate:
    t_checked: int
    defects: list[float]
    certified_t: int
    tol: float
    N: int = 0
    d: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def design_defect(points: PointSet, t: int, tol: float = DEFAULT_TOL, block: int = 256) -> DesignCertificate:
    """Per-degree defects ``D_l = Z(d,l) N^-2 sum_{i,j} P_l(<x_i, x_j>)`` for ``l = 1..t``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    X = points.points
    N, d = points.N, points.d
    parts: list[np.ndarray] = []
    for i0 in range(0, N, block):
        G = np.clip(X[i0:i0 + block] @ X.T, -1.0, 1.0)
        P = legendre_pnd_all(d, t, G)
        parts.append(P[1:].reshape(t, -1).sum(axis=1))
    stacked = np.array(parts)
    defects = [zdim(d, ell) * math.fsum(stacked[:, ell - 1]) / (N * N) for ell in range(1, t + 1)]
    certified = 0
    for D in defects:
        if D > tol:
            break
        certified += 1
    return DesignCertificate(t, defects, certified, tol, N, d)


# -- kernel weights -----------------------------------------------------------

def zdim_float(d: int, ell) -> np.ndarray:
    """:func:`zdim` for real degrees, ``(2l + d - 1) (l+1)...(l+d-2) / (d-1)!``."""
    ell = np.asarray(ell, dtype=float)
    out = (2 * ell + d - 1) / math.factorial(d - 1)
    for k in range(1, d - 1):
        out = out * (ell + k)
    return out


def sobolev_weights(d: int, s: float, ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=float)
    lam = ell * (ell + d - 1)
    return (1.0 + lam) ** (-s) * zdim_float(d, ell)


def logspace_weights(d: int, gamma: float, ell, log_offset: float = 2.0) -> np.ndarray:
    ell = np.asarray(ell, dtype=float)
    lam = ell * (ell + d - 1)
    return (1.0 + lam) ** (-d / 2) * np.log(log_offset + lam) ** (-2 * gamma) * zdim_float(d, ell)


def logspace_norm_weights(d: int, gamma: float, ell) -> np.ndarray:
    """Per-degree weights ``(1+l(l+d-1))^(d/2) ln(3 + l(l+d-1))^(2 gamma)`` of the log-space norm.

    They are not the reciprocals of the kernel weights (offset 3 here, 2 in
    the kernel); the kernel is used as given.
    """
    ell = np.asarray(ell, dtype=float)
    lam = ell * (ell + d - 1)
    return (1.0 + lam) ** (d / 2) * np.log(3.0 + lam) ** (2 * gamma)


# the tail integral is taken numerically up to l = exp(_LOG_CUTOFF) and
# analytically beyond, where the weights equal their leading asymptotics
_LOG_CUTOFF = 150.0


@dataclass(frozen=True)
class _Weights:
    space: str
    d: int
    param: float
    log_offset: float = 2.0

    def __call__(self, ell):
        if self.space == "sobolev":
            return sobolev_weights(self.d, self.param, ell)
        return logspace_weights(self.d, self.param, ell, self.log_offset)

    def beyond(self, y: float) -> float:
        """``int_{e^y}^inf w(l) dl`` from the leading-order form of ``w``."""
        c = 2.0 / math.factorial(self.d - 1)
        if self.space == "sobolev":
            p = 2 * self.param - self.d
            return c * math.exp(-p * y) / p
        g = 2 * self.param
        return c * 2.0 ** (-g) * y ** (1 - g) / (g - 1)


def series_tail(f: _Weights, L: int) -> float:
    """``sum_{l > L} f(l)`` for the smooth, eventually monotone kernel weights.

    Terms up to a few thousand are summed directly; the rest uses the
    Euler-Maclaurin formula with the integral taken in ``log l``.
    """
    L0 = max(L, _DIRECT_SUM_DEGREE)
    direct = math.fsum(f(np.arange(L + 1, L0 + 1, dtype=float))) if L0 > L else 0.0
    integral, _ = integrate.quad(
        lambda y: float(f(math.exp(y))) * math.exp(y), math.log(L0), _LOG_CUTOFF, epsabs=0.0, epsrel=1e-13, limit=400
    )
    integral += f.beyond(_LOG_CUTOFF)
    fm2, fm1, f0, fp1, fp2 = (float(v) for v in f(np.array([L0 - 2, L0 - 1, L0, L0 + 1, L0 + 2], dtype=float)))
    d1 = (fp1 - fm1) / 2
    d3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / 2
    return direct + integral - f0 / 2 - d1 / 12 + d3 / 720


def series_total(f: _Weights, start: int = 1) -> float:
    """``sum_{l >= start} f(l)``."""
    head = math.fsum(f(np.arange(start, _DIRECT_SUM_DEGREE + 1, dtype=float)))
    return head + series_tail(f, _DIRECT_SUM_DEGREE)


def _pick_degree(f, tol: float, max_degree: int) -> tuple[int, float]:
    L = _MIN_DEGREE
    while True:
        tail = series_tail(f, L)
        if tail <= tol or L >= max_degree:
            return L, tail
        L = min(2 * L, max_degree)


_kernel_lock = threading.Lock()


@lru_cache(maxsize=32)
def _series_kernel(space: str, d: int, param: float, L: int, log_offset: float, constant: float) -> KernelSpec:
    f = _Weights(space, d, param, log_offset)
    a = np.empty(L + 1)
    a[0] = constant
    a[1:] = f(np.arange(1, L + 1, dtype=float))
    total = constant + series_total(f)
    label = f"{space}({param})" + ("" if constant == 0 else "+const")
    return coefficient_kernel(a, d, value_at_one=total, label=label)


def sobolev_kernel(d: int, s: float, L: int, constant: float = 0.0) -> KernelSpec:
    """Sobolev reproducing kernel truncated at degree ``L``; ``K(1)`` is the full series."""
    if not s > d / 2:
        raise ValueError(f"Sobolev smoothness must exceed d/2 = {d / 2}, got {s}")
    with _kernel_lock:
        return _series_kernel("sobolev", int(d), float(s), int(L), 2.0, float(constant))


def logspace_kernel(d: int, gamma: float, L: int, log_offset: float = 2.0, constant: float = 0.0) -> KernelSpec:
    if not gamma > 0.5:
        raise ValueError(f"gamma must exceed 1/2, got {gamma}")
    with _kernel_lock:
        return _series_kernel("logspace", int(d), float(gamma), int(L), float(log_offset), float(constant))


# -- worst-case errors ----------------------------------------------------------

@dataclass
class WceResult:
    """Squared worst-case error of the equal-weight rule.

    ``tail_bound`` bounds the off-diagonal truncation error by
    ``(1 - 1/N) sum_{l > L} w_l``; the diagonal carries the full series.
    """

    wce_squared: float
    truncation_degree: int
    tail_bound: float
    space: str
    parameter: float
    tol: float
    certified: bool
    N: int = 0
    d: int = 0
    exact_diagonal: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _wce(points, kernel, space, param, tol, L, tail, exact_diagonal, method, threads):
    N = points.N
    if exact_diagonal:
        value = kernel_energy(points, kernel, method=method, threads=threads).value
        bound = (1.0 - 1.0 / N) * tail
    else:
        truncated = coefficient_kernel(kernel.coeffs, kernel.d, label=kernel.label)
        value = kernel_energy(points, truncated, method=method, threads=threads).value
        bound = tail
    certified = bound <= tol
    if not certified:
        warnings.warn(
            f"{space} truncation at degree {L}: tail bound {bound:.3g} exceeds tol {tol:.3g}",
            RuntimeWarning,
            stacklevel=3,
        )
    return WceResult(value, L, bound, space, param, tol, certified, N, points.d, exact_diagonal)


def _method_for(N: int, method: str) -> str:
    if method != "auto":
        return method
    return "direct" if N <= 64 else "table"


def wce_sobolev(
    points: PointSet,
    s: float,
    tol: float = DEFAULT_TOL,
    *,
    max_degree: int = MAX_DEGREE,
    exact_diagonal: bool = True,
    method: str = "auto",
    threads: int = 1,
) -> WceResult:
    """Worst-case error of equal-weight cubature in H^s(S^d), ``s > d/2``."""
    d = points.d
    if not s > d / 2:
        raise ValueError(f"Sobolev smoothness must exceed d/2 = {d / 2}, got {s}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = _Weights("sobolev", d, s)
    L, tail = _pick_degree(f, tol, max_degree)
    kernel = sobolev_kernel(d, s, L)
    return _wce(points, kernel, f"sobolev(s={s})", s, tol, L, tail, exact_diagonal, _method_for(points.N, method), threads)


def wce_logspace(
    points: PointSet,
    gamma: float,
    tol: float = DEFAULT_TOL,
    *,
    log_offset: float = 2.0,
    max_degree: int = MAX_DEGREE,
    exact_diagonal: bool = True,
    method: str = "auto",
    threads: int = 1,
) -> WceResult:
    """Worst-case error in the log-weighted space with weights ``(1+l(l+d-1))^(-d/2) ln(2 + l(l+d-1))^(-2 gamma)``."""
    d = points.d
    if not gamma > 0.5:
        raise ValueError(f"gamma must exceed 1/2, got {gamma}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = _Weights("logspace", d, gamma, log_offset)
    L, tail = _pick_degree(f, tol, max_degree)
    kernel = logspace_kernel(d, gamma, L, log_offset)
    return _wce(
        points, kernel, f"logspace(gamma={gamma})", gamma, tol, L, tail, exact_diagonal, _method_for(points.N, method), threads
    )
