"""Gamma ratios, Pochhammer symbols, Jacobi and Gegenbauer polynomials.

Everything that can overflow is evaluated through ``gammaln``.  Polynomials
are evaluated with the three-term recurrence in the degree.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, gammasgn

__all__ = [
    "JacobiParams",
    "ExpansionCoefficients",
    "pochhammer",
    "gamma_ratio",
    "jacobi_eval",
    "jacobi_all",
    "jacobi_derivative",
    "legendre_pnd",
    "legendre_pnd_all",
    "legendre_series",
    "zdim",
    "default_k",
    "riesz_expansion_coeffs",
]

# products longer than this switch to log-gamma differencing
_DIRECT_PRODUCT_MAX = 32
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(f"Jacobi parameters must exceed -1, got {self.alpha}, {self.beta}")


def _is_pole(z: float) -> bool:
    return z <= 0 and float(z).is_integer()


def pochhammer(a: float, n: int) -> float:
    """Rising factorial ``(a)_n = a (a+1) ... (a+n-1)`` with ``(a)_0 = 1``."""
    if n < 0 or int(n) != n:
        raise ValueError("n must be a non-negative integer")
    n = int(n)
    if n == 0:
        return 1.0
    if n <= _DIRECT_PRODUCT_MAX or a <= 0:
        out = 1.0
        for k in range(n):
            out *= a + k
        return out
    log_val = gammaln(a + n) - gammaln(a)
    return math.inf if log_val > _LOG_MAX else math.exp(log_val)


def gamma_ratio(n: float, a: float, b: float) -> float:
    """``Gamma(n + a) / Gamma(n + b)`` without forming either gamma value."""
    za, zb = n + a, n + b
    if _is_pole(za) or _is_pole(zb):
        raise ValueError(f"gamma pole: Gamma({za}) / Gamma({zb})")
    sign = gammasgn(za) * gammasgn(zb)
    return float(sign * np.exp(gammaln(za) - gammaln(zb)))


def jacobi_all(params: JacobiParams, n_max: int, x) -> np.ndarray:
    """Jacobi polynomials of degree ``0..n_max`` at ``x``.

    Returns an array of shape ``(n_max + 1,) + np.shape(x)``.
    """
    a, b = params.alpha, params.beta
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max == 0:
        return out
    out[1] = (a + 1) + (a + b + 2) * (x - 1) / 2
    ab = a + b
    for n in range(2, n_max + 1):
        c0 = 2 * n + ab
        lead = 2 * n * (n + ab) * (c0 - 2)
        c1 = (c0 - 1) * (c0 * (c0 - 2) * x + a * a - b * b)
        c2 = 2 * (n + a - 1) * (n + b - 1) * c0
        out[n] = (c1 * out[n - 1] - c2 * out[n - 2]) / lead
    return out


def jacobi_eval(params: JacobiParams, n: int, x):
    """Jacobi polynomial ``P_n^(alpha, beta)(x)``, normalised by ``P_n(1) = binom(n + alpha, n)``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("x must lie in [-1, 1]")
    val = jacobi_all(params, n, x)[n]
    return float(val) if val.ndim == 0 else val


def jacobi_derivative(params: JacobiParams, n: int, x):
    """d/dx P_n^(a,b)(x) = (a + b + n + 1)/2 * P_{n-1}^(a+1, b+1)(x)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    shifted = JacobiParams(params.alpha + 1, params.beta + 1)
    x = np.asarray(x, dtype=float)
    val = 0.5 * (params.alpha + params.beta + n + 1) * jacobi_all(shifted, n - 1, x)[n - 1]
    return float(val) if val.ndim == 0 else val


def legendre_pnd_all(d: int, n_max: int, x) -> np.ndarray:
    """Normalised Gegenbauer polynomials ``P_n^(d)`` on S^d, degrees ``0..n_max``.

    Uses the recurrence for the normalisation ``P_n^(d)(1) = 1`` directly, so
    values stay bounded by one on [-1, 1].
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max == 0:
        return out
    out[1] = x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + d - 1) * x * out[n] - n * out[n - 1]) / (n + d - 1)
    return out


def legendre_pnd(d: int, n: int, x):
    """``P_n^(d)(x) = n! / (d/2)_n * P_n^(d/2-1, d/2-1)(x)``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("x must lie in [-1, 1]")
    val = legendre_pnd_all(d, n, x)[n]
    return float(val) if val.ndim == 0 else val


def legendre_series(d: int, coeffs, x) -> np.ndarray:
    """Clenshaw summation of ``sum_n coeffs[n] * P_n^(d)(x)``."""
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    L = c.size - 1
    if L < 0:
        return np.zeros_like(x)
    if L == 0:
        return np.full_like(x, c[0])
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(L, 0, -1):
        alpha_k = (2 * k + d - 1) / (k + d - 1)
        beta_k1 = -(k + 1) / (k + d)
        b1, b2 = c[k] + alpha_k * x * b1 + beta_k1 * b2, b1
    return c[0] + x * b1 - b2 / d


def zdim(d: int, ell: int) -> int:
    """Dimension of the space of degree-``ell`` spherical harmonics on S^d."""
    if ell == 0:
        return 1
    # (2l + d - 1) (l + d - 2)! / ((d - 1)! l!)
    return (2 * ell + d - 1) * math.comb(ell + d - 2, ell) // (d - 1)


def default_k(d: int) -> int:
    return math.ceil(d / 2) + 2


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Coefficients of ``(1 - x)^(-s/2) = sum_n coeffs[n] P_n^(lam-1/2, lam-1/2)(x)``."""

    d: int
    s: float
    K: int
    lam: float
    coeffs: np.ndarray

    @property
    def jacobi_params(self) -> JacobiParams:
        return JacobiParams(self.lam - 0.5, self.lam - 0.5)

    @property
    def n_max(self) -> int:
        return self.coeffs.size - 1

    def partial_sum(self, x, n_max: int | None = None):
        n_max = self.n_max if n_max is None else n_max
        P = jacobi_all(self.jacobi_params, n_max, x)
        return np.tensordot(self.coeffs[: n_max + 1], P, axes=1)


def _log_riesz_coeffs(d: int, s: float, K: int, n: np.ndarray) -> np.ndarray:
    lam = d / 2 + K + 0.5
    log_pref = (
        (2 * lam - s / 2) * math.log(2.0)
        - 0.5 * math.log(math.pi)
        + gammaln(lam)
        + gammaln(lam - s / 2 + 0.5)
    )
    return (
        log_pref
        + np.log(n + lam)
        + gammaln(n + s / 2) - gammaln(s / 2)
        + gammaln(n + 2 * lam) - gammaln(2 * lam)
        - gammaln(n + lam + 0.5) + gammaln(lam + 0.5)
        - gammaln(n + 2 * lam - s / 2 + 1)
    )


_coeff_lock = threading.Lock()


@lru_cache(maxsize=64)
def _cached_coeffs(d: int, s: float, K: int, n_max: int) -> np.ndarray:
    c = np.exp(_log_riesz_coeffs(d, s, K, np.arange(n_max + 1, dtype=float)))
    c.setflags(write=False)
    return c


def riesz_expansion_coeffs(d: int, s: float, K: int | None = None, n_max: int = 200) -> ExpansionCoefficients:
    """Jacobi expansion of ``(1 - x)^(-s/2)`` with ``lam = d/2 + K + 1/2``.

    Coefficients are positive for ``0 < s < d`` and cached per ``(d, s, K, n_max)``.
    """
    if K is None:
        K = default_k(d)
    if not K > d / 2:
        raise ValueError(f"K must exceed d/2 = {d / 2}, got {K}")
    if not 0 < s < d:
        raise ValueError(f"s must lie in (0, d), got {s}")
    with _coeff_lock:
        c = _cached_coeffs(int(d), float(s), int(K), int(n_max))
    return ExpansionCoefficients(d=d, s=s, K=K, lam=d / 2 + K + 0.5, coeffs=c)
