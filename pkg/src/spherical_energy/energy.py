"""Kernel energies, the discrete Riesz s-energy and the energy integral V_d(s)."""
from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.spatial.distance import cdist
from scipy.special import gammaln

from .geometry import PointSet
from .specfun import (
    _log_riesz_coeffs,
    default_k,
    jacobi_all,
    legendre_series,
    riesz_expansion_coeffs,
    JacobiParams,
)

__all__ = [
    "KernelSpec",
    "EnergyReport",
    "CoincidentPointsError",
    "coefficient_kernel",
    "riesz_kernel",
    "custom_kernel",
    "sphere_average",
    "v_d",
    "v_d_gamma_quotient",
    "riesz_energy",
    "kernel_energy",
    "kernel_energy_offdiag",
    "pair_sum",
    "h_t_eval",
    "r_t_eval",
]

MIN_PAIR_DISTANCE = 1e-14
DEFAULT_BLOCK = 256
# coefficient kernels longer than this are tabulated in the polar angle
_DIRECT_DEGREE_MAX = 32
_TABLE_NODES = 2 ** 16 + 1


class CoincidentPointsError(ValueError):
    """Two points closer than :data:`MIN_PAIR_DISTANCE` under a singular kernel."""


def _normalising_constant(d: int) -> float:
    return math.exp(gammaln((d + 1) / 2) - gammaln(d / 2)) / math.sqrt(math.pi)


def sphere_average(f: Callable[[float], float], d: int, endpoint_power: float = 0.0) -> float:
    """``int_{S^d} f(<x, y>) (1 - <x,y>)^p dsigma(x)`` via the one-dimensional reduction.

    ``endpoint_power`` folds an integrable ``(1 - t)^p`` singularity into the
    quadrature weight, so ``f`` itself should be smooth.
    """
    a = d / 2 - 1 + endpoint_power
    b = d / 2 - 1
    val, _ = integrate.quad(f, -1.0, 1.0, weight="alg", wvar=(a, b), epsabs=1e-14, epsrel=1e-13, limit=200)
    return _normalising_constant(d) * val


@lru_cache(maxsize=256)
def _v_d_quad(s: float, d: int) -> float:
    return 2.0 ** (-s / 2) * sphere_average(lambda t: 1.0, d, endpoint_power=-s / 2)


def _v_d_tanhsinh(s: float, d: int) -> float:
    import mpmath

    # near u = 1 - t = 0 the substitution u = w^(1/(e+1)) absorbs u^e
    with mpmath.workdps(40):
        s_, d_ = mpmath.mpf(s), mpmath.mpf(d)
        e = d_ / 2 - 1 - s_ / 2
        g = lambda u: 2 ** (-s_ / 2) * (2 - u) ** (d_ / 2 - 1)
        near = mpmath.quad(lambda w: g(w ** (1 / (e + 1))), [0, 1]) / (e + 1)
        far = mpmath.quad(lambda u: u ** e * g(u), [1, 2])
        c = mpmath.gamma((d_ + 1) / 2) / (mpmath.sqrt(mpmath.pi) * mpmath.gamma(d_ / 2))
        return float(c * (near + far))


def _v_d_closed(s: float, d: int) -> float:
    return math.exp(
        (d - s - 1) * math.log(2.0)
        + gammaln((d + 1) / 2)
        + gammaln((d - s) / 2)
        - 0.5 * math.log(math.pi)
        - gammaln(d - s / 2)
    )


def v_d(s: float, d: int, method: str = "quad") -> float:
    """Energy integral ``V_d(s) = int int |x - y|^(-s) dsigma dsigma``.

    ``method`` is ``"quad"`` (adaptive, algebraic endpoint weight),
    ``"tanhsinh"`` (double-exponential quadrature of the raw integrand) or
    ``"closed"`` (beta-function closed form).
    """
    if not 0 < s < d:
        raise ValueError(f"s must lie in (0, d), got s={s}, d={d}")
    if method == "quad":
        return _v_d_quad(float(s), int(d))
    if method == "tanhsinh":
        return _v_d_tanhsinh(float(s), int(d))
    if method == "closed":
        return _v_d_closed(float(s), int(d))
    raise ValueError(f"unknown method {method!r}")


def v_d_gamma_quotient(s: float, d: int) -> float:
    """``Gamma((d+1)/2) Gamma(d-s) / (Gamma(d-s+1) Gamma(d-s/2))``.

    Coincides with :func:`v_d` at (d, s) = (2, 1) but not in general; kept so
    reports can show the deviation.
    """
    return math.exp(gammaln((d + 1) / 2) + gammaln(d - s) - gammaln(d - s + 1) - gammaln(d - s / 2))


# -- kernels ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A zonal kernel ``K(<x, y>)`` on S^d.

    ``kind`` is ``"coefficients"`` (Gegenbauer series with ``a_n >= 0``),
    ``"riesz"`` (``|x - y|^(-s)``) or ``"custom"`` (a function of the inner
    product).  For a truncated series, ``value_at_one`` may carry the value of
    the full series at ``t = 1``; it is used for the diagonal of energy sums.
    """

    kind: str
    d: int
    coeffs: Optional[np.ndarray] = None
    s: Optional[float] = None
    func: Optional[Callable] = None
    singular_at_1: bool = False
    value_at_one: Optional[float] = None
    label: str = ""
    _table: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.kind == "coefficients":
            c = np.array(self.coeffs, dtype=float)
            if c.ndim != 1 or c.size == 0:
                raise ValueError("coefficients must be a non-empty sequence")
            if np.any(c < 0):
                raise ValueError("coefficients must be non-negative (positive definite kernel)")
            c.setflags(write=False)
            object.__setattr__(self, "coeffs", c)
        elif self.kind == "riesz":
            if self.s is None or not 0 < self.s < self.d:
                raise ValueError(f"Riesz exponent must lie in (0, d), got {self.s}")
            object.__setattr__(self, "singular_at_1", True)
        elif self.kind == "custom":
            if self.func is None:
                raise ValueError("custom kernels need a function")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @property
    def degree(self) -> Optional[int]:
        return None if self.coeffs is None else self.coeffs.size - 1

    @property
    def a0(self) -> float:
        """Constant Gegenbauer coefficient, i.e. the sphere average of the kernel."""
        if self.kind == "coefficients":
            return float(self.coeffs[0])
        if self.kind == "riesz":
            return v_d(self.s, self.d)
        return sphere_average(lambda t: float(self.func(t)), self.d)

    def at_one(self) -> float:
        if self.singular_at_1:
            return math.inf
        if self.value_at_one is not None:
            return float(self.value_at_one)
        if self.kind == "coefficients":
            return float(math.fsum(self.coeffs))
        return float(self.func(1.0))

    def __call__(self, t):
        """Kernel at inner products ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "coefficients":
            return legendre_series(self.d, self.coeffs, t)
        if self.kind == "riesz":
            return (2.0 - 2.0 * t) ** (-self.s / 2)
        return self.func(t)

    def pair_values(self, r: np.ndarray, method: str = "auto") -> np.ndarray:
        """Kernel at chordal distances ``r``.

        Long coefficient series are read from a cubic spline on a uniform
        grid in the polar angle; ``method="direct"`` forces Clenshaw summation.
        """
        if self.kind == "riesz":
            return r ** (-self.s)
        t = 1.0 - 0.5 * r * r
        if self.kind == "custom":
            return self.func(t)
        if method == "direct" or (method == "auto" and self.degree <= _DIRECT_DEGREE_MAX):
            return legendre_series(self.d, self.coeffs, t)
        theta = 2.0 * np.arcsin(np.minimum(0.5 * r, 1.0))
        return _interp_uniform(theta, self._tabulated())

    def _tabulated(self) -> np.ndarray:
        """Cubic spline coefficients of the truncated series in the polar angle, shape ``(4, n)``."""
        with self._lock:
            coef = self._table.get("theta")
            if coef is None:
                grid = np.linspace(0.0, math.pi, _TABLE_NODES)
                vals = legendre_series(self.d, self.coeffs, np.cos(grid))
                # K(cos theta) is even about both poles, so the end slopes vanish
                coef = CubicSpline(grid, vals, bc_type="clamped").c
                coef.setflags(write=False)
                self._table["theta"] = coef
            return coef


def _interp_uniform(theta: np.ndarray, coef: np.ndarray) -> np.ndarray:
    n = coef.shape[1]
    h = math.pi / n
    pos = np.clip(theta, 0.0, math.pi) / h
    i = np.minimum(pos.astype(np.int64), n - 1)
    x = (pos - i) * h
    return ((coef[0, i] * x + coef[1, i]) * x + coef[2, i]) * x + coef[3, i]


def coefficient_kernel(a, d: int, value_at_one: Optional[float] = None, label: str = "") -> KernelSpec:
    return KernelSpec("coefficients", d, coeffs=a, value_at_one=value_at_one, label=label or "coefficients")


def riesz_kernel(s: float, d: int) -> KernelSpec:
    return KernelSpec("riesz", d, s=s, label=f"riesz(s={s})")


def custom_kernel(func: Callable, d: int, singular_at_1: bool = False, label: str = "custom") -> KernelSpec:
    return KernelSpec("custom", d, func=func, singular_at_1=singular_at_1, label=label)


# -- pair sums --------------------------------------------------------------

def pair_sum(
    points: PointSet,
    pair_fn: Callable[[np.ndarray], np.ndarray],
    *,
    singular: bool = False,
    block: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> float:
    """``sum_{i<j} pair_fn(|x_i - x_j|)`` over row blocks.

    Block sums are folded in block order with ``math.fsum``, so the result
    does not depend on ``threads``.
    """
    X = points.points
    N = X.shape[0]
    if N < 2:
        return 0.0
    starts = list(range(0, N, block))

    def work(i0: int) -> tuple[float, float]:
        i1 = min(i0 + block, N)
        r = cdist(X[i0:i1], X[i0:])
        # strict upper triangle of the diagonal block, all of the rest
        mask = np.triu(np.ones((i1 - i0, i1 - i0), dtype=bool), k=1)
        rd = r[:, : i1 - i0][mask]
        rest = r[:, i1 - i0:]
        rmin = min(rd.min() if rd.size else math.inf, rest.min() if rest.size else math.inf)
        if singular and rmin < MIN_PAIR_DISTANCE:
            raise CoincidentPointsError(f"pair distance {rmin:.3g} below {MIN_PAIR_DISTANCE}")
        total = np.sum(pair_fn(rd)) if rd.size else 0.0
        if rest.size:
            total += np.sum(pair_fn(rest))
        return float(total), rmin

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(i0) for i0 in starts]
    return math.fsum(p[0] for p in parts)


@dataclass
class EnergyReport:
    value: float
    normalization: str
    leading_term: float
    remainder: float
    remainder_scaled: Optional[float]
    N: int
    d: int
    kernel: str = ""
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def riesz_energy(points: PointSet, s: float, *, block: int = DEFAULT_BLOCK, threads: int = 1) -> EnergyReport:
    """``E = 1/2 sum_{i != j} |x_i - x_j|^(-s)`` with leading term ``V_d(s) N^2 / 2``.

    The sum itself is finite for every ``s > 0``.  For ``s >= d`` the energy
    integral diverges, so the leading term and remainder are NaN.
    """
    d, N = points.d, points.N
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    value = pair_sum(points, lambda r: r ** (-s), singular=True, block=block, threads=threads)
    if s >= d:
        nan = float("nan")
        return EnergyReport(value, "pairwise-half", nan, nan, nan, N, d, f"riesz(s={s})", {"hypersingular": True})
    V = v_d(s, d)
    leading = 0.5 * V * N * N
    rem = value - leading
    return EnergyReport(
        value=value,
        normalization="pairwise-half",
        leading_term=leading,
        remainder=rem,
        remainder_scaled=rem / N ** (1 + s / d),
        N=N,
        d=d,
        kernel=f"riesz(s={s})",
        notes={"v_d": V, "v_d_gamma_quotient": v_d_gamma_quotient(s, d)},
    )


def _check_dim(points: PointSet, kernel: KernelSpec):
    if points.d != kernel.d:
        raise ValueError(f"kernel is defined on S^{kernel.d}, points live on S^{points.d}")


def kernel_energy(
    points: PointSet,
    kernel: KernelSpec,
    *,
    method: str = "auto",
    block: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> EnergyReport:
    """``E(K, X) = N^-2 sum_{i,j} K(<x_i, x_j>)``, diagonal included."""
    _check_dim(points, kernel)
    if kernel.singular_at_1:
        raise ValueError("kernel is singular at 1; use kernel_energy_offdiag")
    N = points.N
    off = pair_sum(points, lambda r: kernel.pair_values(r, method), block=block, threads=threads)
    value = (N * kernel.at_one() + 2.0 * off) / (N * N)
    a0 = kernel.a0
    return EnergyReport(value, "mean-squared", a0, value - a0, None, N, points.d, kernel.label)


def kernel_energy_offdiag(
    points: PointSet,
    kernel: KernelSpec,
    *,
    method: str = "auto",
    block: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> EnergyReport:
    """``N^-2 sum_{i != j} K(<x_i, x_j>)``."""
    _check_dim(points, kernel)
    N, d = points.N, points.d
    off = pair_sum(
        points,
        lambda r: kernel.pair_values(r, method),
        singular=kernel.singular_at_1,
        block=block,
        threads=threads,
    )
    value = 2.0 * off / (N * N)
    a0 = kernel.a0
    rem = value - a0
    scaled = rem * N ** (1 - kernel.s / d) if kernel.kind == "riesz" else None
    return EnergyReport(value, "offdiag-mean", a0, rem, scaled, N, d, kernel.label)


# -- truncated expansion of the Riesz kernel ---------------------------------

def _check_k(d: int, K: int) -> None:
    if not K > d / 2:
        raise ValueError(f"K must exceed d/2 = {d / 2}, got {K}")


def h_t_eval(d: int, s: float, K: Optional[int], t: int, x):
    """Degree-``t`` partial sum of the Jacobi expansion of ``2^(-s/2) (1 - x)^(-s/2)``."""
    K = default_k(d) if K is None else K
    _check_k(d, K)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("x must lie in [-1, 1]")
    exp = riesz_expansion_coeffs(d, s, K, t)
    val = 2.0 ** (-s / 2) * exp.partial_sum(x)
    return float(val) if val.ndim == 0 else val


def r_t_eval(d: int, s: float, K: Optional[int], t: int, x, tol: float = 1e-10, max_degree: int = 400_000):
    """Tail ``sum_{n > t}`` of the same expansion, for ``-1 < x < 1``.

    Terms are summed in chunks until the decay envelope
    ``n^(-d/2 - K + s - 3/2)`` bounds the remaining tail below ``tol``.
    """
    K = default_k(d) if K is None else K
    _check_k(d, K)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("the tail only converges for -1 < x < 1")
    lam = d / 2 + K + 0.5
    params = JacobiParams(lam - 0.5, lam - 0.5)
    decay = d / 2 + K - s + 1.5
    chunk = 256
    xf = x.reshape(-1)
    # P_{n-1}, P_{n-2} carried between chunks
    P = jacobi_all(params, t + 1, xf)
    prev2, prev1 = P[t], P[t + 1]
    acc = np.zeros_like(xf)
    n0 = t + 1
    first = np.exp(_log_riesz_coeffs(d, s, K, np.array([n0], dtype=float)))[0] * prev1
    acc += first
    n = n0
    a, b = params.alpha, params.beta
    ab = a + b
    while True:
        ns = np.arange(n + 1, n + 1 + chunk, dtype=float)
        coef = np.exp(_log_riesz_coeffs(d, s, K, ns))
        env = np.zeros_like(xf)
        for j, m in enumerate(range(n + 1, n + 1 + chunk)):
            c0 = 2 * m + ab
            lead = 2 * m * (m + ab) * (c0 - 2)
            c1 = (c0 - 1) * (c0 * (c0 - 2) * xf + a * a - b * b)
            c2 = 2 * (m + a - 1) * (m + b - 1) * c0
            cur = (c1 * prev1 - c2 * prev2) / lead
            term = coef[j] * cur
            acc += term
            np.maximum(env, np.abs(term), out=env)
            prev2, prev1 = prev1, cur
        n += chunk
        tail = env * n / (decay - 1.0)
        if np.all(tail < tol) or n >= max_degree:
            break
    val = (2.0 ** (-s / 2) * acc).reshape(x.shape)
    return float(val) if val.ndim == 0 else val
