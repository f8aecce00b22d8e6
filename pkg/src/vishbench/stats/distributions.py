"""Distribution functions needed by the rank tests.

The chi-square tail uses the regularized incomplete gamma function
(power series below ``a + 1``, Lentz continued fraction above).  The
studentized range CDF uses the infinite-df form

    F(q; k) = k * integral phi(z) * [Phi(z) - Phi(z - q)]^(k - 1) dz

integrated adaptively over z in [-8, 8].
"""
from __future__ import annotations

import math

from scipy import integrate
from scipy.special import ndtr

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"gamma series failed to converge for a={a}, x={x}")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction failed for a={a}, x={x}")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_contfrac(a, x)


def chi2_sf(x: float, df: int | float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0:
        return 1.0
    return gammainc_upper(df / 2.0, x / 2.0)


def studentized_range_cdf(q: float, k: int, *, epsabs: float = 1e-8) -> float:
    """CDF of the range of ``k`` iid standard normals (infinite degrees of freedom)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if q <= 0:
        return 0.0

    def integrand(z):
        return math.exp(-0.5 * z * z) * (ndtr(z) - ndtr(z - q)) ** (k - 1)

    val, _ = integrate.quad(integrand, -8.0, 8.0, epsabs=epsabs, epsrel=1e-10, limit=200)
    return min(1.0, max(0.0, k * val / math.sqrt(2.0 * math.pi)))
