"""Gauss hypergeometric function and adaptive quadrature.

The hypergeometric routine covers real arguments ``z <= 1``: a direct power
series near the origin, the Pfaff transformation for large negative ``z`` and
the ``1 - z`` connection formulas (including the logarithmic integer cases)
near ``z = 1``.

The quadrature is an adaptive Gauss-Kronrod (7, 15) scheme with optional
power-law endpoint substitution.  It is the independent oracle against which
closed-form impact trajectories are checked.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy.special import digamma, gamma, rgamma

__all__ = [
    "DomainError",
    "QuadratureError",
    "QuadratureSpec",
    "hyp2f1",
    "hyp2f1_series",
    "hyp2f1_one_minus_z",
    "integrate",
]

_EPS = 2.220446049250313e-16
_MAX_TERMS = 200_000


class DomainError(ValueError):
    """Raised when arguments fall outside the supported domain."""


class QuadratureError(RuntimeError):
    """Tolerance not reached; carries the best available estimate."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


_TINY = 1e-250
# direct series below this |z|: at most ~400 terms, and it avoids the
# connection formulas whose gamma/digamma factors cancel near integers
_SERIES_RADIUS = 0.9
_HUGE = 1e200


def _digamma(x: float) -> float:
    """Digamma with reflection for x < 1/2.

    ``x - round(x)`` is exact, so cot(pi x) keeps full relative accuracy
    next to the poles, where the library routine loses digits.
    """
    if x >= 0.5:
        return float(digamma(x))
    r = x - round(x)
    return float(digamma(1.0 - x)) - math.pi / math.tan(math.pi * r)


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def hyp2f1_series(a: float, b: float, c: float, z: float, max_terms: int = _MAX_TERMS) -> float:
    """Sum the defining power series of 2F1(a, b; c; z) term by term.

    Converges for |z| < 1 (and at z = 1 when c - a - b > 0, slowly).
    Terminates exactly when a or b is a non-positive integer.
    """
    if _is_nonpositive_int(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    term = 1.0
    total = 1.0
    small = 0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) <= _EPS * abs(total):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise DomainError(f"2F1 series did not converge in {max_terms} terms (z={z})")


def _log_case(a: float, b: float, m: int, w: float) -> float:
    # c = a + b + m with integer m >= 0, w = 1 - z in (0, 0.5]
    c = a + b + m
    lw = math.log(w)
    finite = 0.0
    if m > 0:
        pre = gamma(m) * gamma(c) * rgamma(a + m) * rgamma(b + m)
        t = 1.0
        finite = 1.0
        for n in range(m - 1):
            t *= (a + n) * (b + n) / ((n + 1.0) * (1.0 - m + n)) * w
            finite += t
        finite *= pre
    pre2 = gamma(c) * rgamma(a) * rgamma(b)
    if pre2 == 0.0:
        return finite
    # running coefficient (a+m)_n (b+m)_n / (n! (n+m)!) w^n
    coef = 1.0 / math.factorial(m)
    psi1 = _digamma(1.0)
    psi2 = _digamma(m + 1.0)
    psi3 = _digamma(a + m)
    psi4 = _digamma(b + m)
    total = 0.0
    for n in range(_MAX_TERMS):
        if m == 0:
            bracket = 2.0 * psi1 - psi3 - psi4 - lw
        else:
            bracket = lw - psi1 - psi2 + psi3 + psi4
        term = coef * bracket
        total += term
        if n > 2 and abs(term) <= _EPS * abs(total):
            break
        coef *= (a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0)) * w
        psi1 += 1.0 / (n + 1.0)
        psi2 += 1.0 / (n + m + 1.0)
        psi3 += 1.0 / (a + m + n)
        psi4 += 1.0 / (b + m + n)
    else:
        raise DomainError("logarithmic connection series did not converge")
    if m == 0:
        return pre2 * total
    return finite - (-1.0) ** m * pre2 * w**m * total


def hyp2f1_one_minus_z(a: float, b: float, c: float, z: float) -> float:
    """Evaluate 2F1 through the ``1 - z`` connection formulas.

    Valid for 0 < z < 1; accurate when 1 - z is small.  Integer values of
    ``c - a - b`` use the logarithmic limit forms.
    """
    w = 1.0 - z
    m = c - a - b
    mi = round(m)
    if abs(m - mi) <= 1e-12 * max(1.0, abs(m)):
        if mi < 0:
            # Euler transformation flips the sign of c - a - b
            return w**mi * _log_case(c - a, c - b, -mi, w)
        return _log_case(a, b, mi, w)
    if abs(m - mi) < 1e-6:
        # nearly integer: gamma factors cancel catastrophically
        return hyp2f1_series(a, b, c, z)
    t1 = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b)
    t2 = gamma(c) * gamma(-m) * rgamma(a) * rgamma(b)
    out = 0.0
    if t1 != 0.0:
        out += t1 * hyp2f1_series(a, b, 1.0 - m, w)
    if t2 != 0.0:
        out += t2 * w**m * hyp2f1_series(c - a, c - b, 1.0 + m, w)
    return float(out)


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 1.

    Raises :class:`DomainError` for c a non-positive integer, for z > 1 and
    for z = 1 when the series diverges (c - a - b <= 0).
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if _is_nonpositive_int(c):
        raise DomainError(f"c = {c} is a non-positive integer")
    if not math.isfinite(z) or z > 1.0:
        raise DomainError(f"z = {z} outside the supported domain z <= 1")
    if a == 0.0 or b == 0.0 or z == 0.0:
        return 1.0
    if min(abs(a), abs(b)) < _TINY and max(abs(a), abs(b), 1.0) * max(abs(z), 1.0) < _HUGE * abs(c):
        # first-order term a*b*z/c is far below rounding; avoids 1/a overflow
        # inside the logarithmic connection formulas
        return 1.0
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        # terminating series: a polynomial, exact for any z
        return hyp2f1_series(a, b, c, z)
    if z == 1.0:
        if c - a - b <= 0:
            raise DomainError("2F1 diverges at z = 1 for c - a - b <= 0")
        return float(gamma(c) * gamma(c - a - b) * rgamma(c - a) * rgamma(c - b))
    if abs(z) <= _SERIES_RADIUS:
        return hyp2f1_series(a, b, c, z)
    if z < -_SERIES_RADIUS:
        # Pfaff: 2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; z/(z-1))
        return (1.0 - z) ** (-a) * hyp2f1(a, c - b, c, z / (z - 1.0))
    return hyp2f1_one_minus_z(a, b, c, z)


# Gauss-Kronrod (7, 15) abscissae and weights on [-1, 1]
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def _gk15(f: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    fc = f(center)
    kronrod = _WGK[7] * fc
    gauss = _WG[3] * fc
    for j in range(7):
        dx = half * _XGK[j]
        fsum = f(center - dx) + f(center + dx)
        kronrod += _WGK[j] * fsum
        if j % 2 == 1:
            gauss += _WG[j // 2] * fsum
    return kronrod * half, abs((kronrod - gauss) * half)


def _adaptive(f, lo, hi, rel_tol, abs_tol, limit):
    est, err = _gk15(f, lo, hi)
    heap = [(-err, lo, hi, est)]
    total, total_err = est, err
    n_sub = 1
    while total_err > max(rel_tol * abs(total), abs_tol):
        if n_sub >= limit:
            raise QuadratureError(
                f"tolerance {rel_tol:g} not met after {limit} subdivisions", total, total_err
            )
        neg_err, a, b, val = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            raise QuadratureError("interval collapsed below machine resolution", total, total_err)
        v1, e1 = _gk15(f, a, mid)
        v2, e2 = _gk15(f, mid, b)
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, a, mid, v1))
        heapq.heappush(heap, (-e2, mid, b, v2))
        n_sub += 1
    # re-sum to shed accumulated rounding from the running updates
    total = math.fsum(item[3] for item in heap)
    return total, total_err


def _substituted(f, lo, hi, exponent, at_lower):
    # integrand ~ |s - endpoint|^exponent; u = |s - endpoint|^(1 + exponent)
    p = 1.0 / (1.0 + exponent)
    span = (hi - lo) ** (1.0 + exponent)
    # Kronrod nodes are interior, but u**p can still round onto the endpoint.
    # The transformed integrand is bounded, so clamping u costs O(u_min).
    end = lo if at_lower else hi
    u_min = max(4.0 * 2.0**-52 * abs(end), 1e-300) ** (1.0 + exponent)
    if at_lower:
        def g(u):
            u = max(u, u_min)
            return f(lo + u**p) * p * u ** (p - 1.0)
    else:
        def g(u):
            u = max(u, u_min)
            return f(hi - u**p) * p * u ** (p - 1.0)
    return g, span


def integrate(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    rel_tol: float = 1e-8,
    lower_exponent: Optional[float] = None,
    upper_exponent: Optional[float] = None,
    abs_tol: float = 1e-15,
    limit: int = 2000,
) -> float:
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[lower, upper]``.

    ``lower_exponent``/``upper_exponent`` declare an integrable power-law
    behaviour ``|s - endpoint|**exponent`` (exponent > -1).  The variable
    change ``u = |s - endpoint|**(1 + exponent)`` removes it before
    refinement.  Raises :class:`QuadratureError` (with ``estimate``) when the
    tolerance cannot be met.
    """
    if not lower < upper:
        raise ValueError("need lower < upper")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    for e in (lower_exponent, upper_exponent):
        if e is not None and e <= -1.0:
            raise DomainError(f"endpoint exponent {e} is not integrable")
    if lower_exponent is not None and upper_exponent is not None:
        mid = 0.5 * (lower + upper)
        return integrate(f, lower, mid, rel_tol, lower_exponent, None, abs_tol / 2, limit) + integrate(
            f, mid, upper, rel_tol, None, upper_exponent, abs_tol / 2, limit
        )
    if lower_exponent is not None:
        g, span = _substituted(f, lower, upper, lower_exponent, True)
        return _adaptive(g, 0.0, span, rel_tol, abs_tol, limit)[0]
    if upper_exponent is not None:
        g, span = _substituted(f, lower, upper, upper_exponent, False)
        return _adaptive(g, 0.0, span, rel_tol, abs_tol, limit)[0]
    return _adaptive(f, lower, upper, rel_tol, abs_tol, limit)[0]


@dataclass(frozen=True)
class QuadratureSpec:
    """Bundled arguments for :func:`integrate`."""

    integrand: Callable[[float], float]
    lower: float
    upper: float
    rel_tol: float = 1e-8
    lower_exponent: Optional[float] = None
    upper_exponent: Optional[float] = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")

    def integrate(self) -> float:
        return integrate(
            self.integrand,
            self.lower,
            self.upper,
            rel_tol=self.rel_tol,
            lower_exponent=self.lower_exponent,
            upper_exponent=self.upper_exponent,
        )
