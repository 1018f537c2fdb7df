"""Standard normal CDF and quantile, and the chi-square CDF.

The quantile uses Acklam's rational approximation followed by one Newton
step on :func:`normal_cdf`; the chi-square CDF is the regularized lower
incomplete gamma function, evaluated by its power series below ``a + 1`` and
by a Lentz continued fraction for the upper tail otherwise.
"""

from __future__ import annotations

import math

from .errors import DataError

# Probabilities fed to the quantile are clamped to this range so that
# F(chi2) == 0 or 1 still yields a finite z.
P_FLOOR = 1e-300
Q_FLOOR = 1e-16

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    if not math.isfinite(x):
        raise DataError(f"normal_cdf needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    """Upper tail ``1 - Phi(x)`` without cancellation."""
    if not math.isfinite(x):
        raise DataError(f"normal_sf needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(x / _SQRT2)


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    q = math.sqrt(-2.0 * math.log1p(-p))
    return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)


def _lower_quantile(p: float) -> float:
    # p <= 0.5; the Newton step runs on the lower tail so tiny p keep full
    # relative precision.
    x = _acklam(p)
    density = math.exp(-0.5 * x * x) / _SQRT2PI
    if density > 0.0:
        err = normal_cdf(x) - p
        u = err / density
        x = x - u
    return x


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open interval (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DataError(f"normal_quantile needs 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _lower_quantile(p)
    return -_lower_quantile(1.0 - p)


def normal_isf(q: float) -> float:
    """Quantile of the upper tail: ``x`` with ``1 - Phi(x) = q``."""
    if not (0.0 < q < 1.0):
        raise DataError(f"normal_isf needs 0 < q < 1, got {q!r}")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -_lower_quantile(q)
    return _lower_quantile(1.0 - q)


_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float) -> float:
    total = term = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float) -> float:
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
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def _regularized_gamma(a: float, x: float) -> tuple[float, float]:
    """Return ``(P(a, x), Q(a, x))``, each computed on its accurate side."""
    if x == 0.0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cfrac(a, x)
    return 1.0 - q, q


def _check_chisq(x: float, df: int) -> None:
    if int(df) != df or df < 1:
        raise DataError(f"degrees of freedom must be a positive integer, got {df!r}")
    if not (x >= 0.0):
        raise DataError(f"chi-square argument must be >= 0, got {x!r}")


def chisq_cdf(x: float, df: int) -> float:
    _check_chisq(x, df)
    if math.isinf(x):
        return 1.0
    return _regularized_gamma(df / 2.0, x / 2.0)[0]


def chisq_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    _check_chisq(x, df)
    if math.isinf(x):
        return 0.0
    return _regularized_gamma(df / 2.0, x / 2.0)[1]


def chisq_to_z(x: float, df: int) -> tuple[float, bool]:
    """Map a chi-square value through its CDF and then the normal quantile.

    Returns ``(z, nudged)``; ``nudged`` is true when the probability had to
    be pulled away from 0 or 1 to keep ``z`` finite. The upper half is
    computed from the survival function so large statistics stay ordered.
    """
    p = chisq_cdf(x, df)
    if p <= 0.5:
        nudged = p < P_FLOOR
        return normal_quantile(max(p, P_FLOOR)), nudged
    q = chisq_sf(x, df)
    nudged = q < Q_FLOOR
    return normal_isf(max(q, Q_FLOOR)), nudged
