"""Latent order book profile and the impact obtained by inverting its depth.

The profile on log-price offsets ``x`` in [0, 1] is

    V(x) = x**n * exp(b x) / (Y * Z),   Z = int_0^1 y**n exp(b y) dy,

and a metaorder of daily fraction ``pi`` moves the price by the ``I`` that
solves ``pi = int_0^I V(x) dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .special import DomainError

__all__ = [
    "BookParams",
    "BookSaturationError",
    "book_profile",
    "cumulative_depth",
    "invert_impact",
    "impact_log_closed",
    "GRID_SIZE",
]

GRID_SIZE = 10_000


class BookSaturationError(DomainError):
    def __init__(self, pi, capacity):
        super().__init__(f"daily fraction {pi:g} exceeds book capacity {capacity:g}")
        self.capacity = capacity


@dataclass(frozen=True)
class BookParams:
    y_norm: float
    b: float
    n: float = 0.0

    def __post_init__(self):
        if not self.y_norm > 0:
            raise DomainError("Y must be positive")
        if not self.b > 0:
            raise DomainError("b must be positive")
        if not self.n >= 0:
            raise DomainError("n must be non-negative")

    @property
    def c(self) -> float:
        return math.expm1(self.b)

    @property
    def capacity(self) -> float:
        """Total depth between offsets 0 and 1."""
        return 1.0 / self.y_norm


def _raw_cumulative(x, b: float, n: float):
    """int_0^x y**n exp(b y) dy for x >= 0.

    Uses x**(n+1) * sum_k (b x)**k / (k! (n + k + 1)); every term is
    positive, so the sum has no cancellation.
    """
    x = np.asarray(x, dtype=float)
    bx = b * x
    term = np.ones_like(x)
    total = term / (n + 1.0)
    k = 0
    while True:
        k += 1
        term = term * bx / k
        inc = term / (n + k + 1.0)
        total = total + inc
        if k > bx.max(initial=0.0) and np.all(inc <= 1e-17 * total):
            break
        if k > 5000:
            raise DomainError("depth series did not converge; b too large")
    return x ** (n + 1.0) * total


@lru_cache(maxsize=64)
def _normaliser(b: float, n: float) -> float:
    if n == 0:
        return math.expm1(b) / b
    return float(_raw_cumulative(np.array([1.0]), b, n)[0])


def book_profile(p: BookParams, x):
    """Depth density at log-price offset ``x``; it integrates to 1/Y over [0, 1]."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("x must lie in [0, 1]")
    return x**p.n * np.exp(p.b * x) / (p.y_norm * _normaliser(p.b, p.n))


def cumulative_depth(p: BookParams, impact):
    """int_0^impact V(x) dx."""
    impact = np.asarray(impact, dtype=float)
    if p.n == 0:
        return np.expm1(p.b * impact) / (p.b * p.y_norm * _normaliser(p.b, 0.0))
    return _raw_cumulative(impact, p.b, p.n) / (p.y_norm * _normaliser(p.b, p.n))


@lru_cache(maxsize=32)
def _table(p: BookParams):
    grid = np.linspace(0.0, 1.0, GRID_SIZE)
    cum = cumulative_depth(p, grid)
    cum.setflags(write=False)
    return grid, cum


def invert_impact(p: BookParams, pi, tol: float = 1e-14):
    """Impact ``I`` with ``cumulative_depth(p, I) == pi``.

    A monotone grid table gives a bracketing cell and a starting point;
    safeguarded Newton steps on the exact cumulative depth finish the job.
    Raises :class:`BookSaturationError` when ``pi`` exceeds the capacity.
    """
    pi_arr = np.atleast_1d(np.asarray(pi, dtype=float))
    cap = p.capacity
    if np.any(pi_arr < 0):
        raise DomainError("pi must be non-negative")
    if np.any(pi_arr > cap * (1 + 1e-12)):
        raise BookSaturationError(float(pi_arr.max()), cap)
    target = np.minimum(pi_arr, cap)
    grid, cum = _table(p)
    hi_idx = np.clip(np.searchsorted(cum, target, side="left"), 1, len(grid) - 1)
    lo = grid[hi_idx - 1].copy()
    hi = grid[hi_idx].copy()
    x = np.interp(target, cum, grid)
    for _ in range(100):
        f = cumulative_depth(p, x) - target
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        dens = book_profile(p, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - f / dens
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), newton)
        done = np.abs(nxt - x) <= tol * np.maximum(x, 1e-300)
        x = nxt
        if np.all(done | (f == 0)):
            break
    x = np.where(target == 0, 0.0, x)
    x = np.where(target >= cap, 1.0, x)
    return x if np.ndim(pi) else float(x[0])


def impact_log_closed(y_norm: float, b: float, pi):
    """Y * log(1 + c*pi) / log(1 + c) with c = exp(b) - 1."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi < 0):
        raise DomainError("pi must be non-negative")
    c = math.expm1(b)
    out = y_norm * np.log1p(c * pi) / math.log1p(c)
    return out if out.ndim else float(out)
