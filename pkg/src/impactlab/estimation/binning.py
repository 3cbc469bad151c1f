"""Evenly populated bins and conditional impact curves."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = ["BinnedCurve", "equal_count_bins", "impact_curve", "bin_statistics"]


def equal_count_bins(values, n_bins: int) -> np.ndarray:
    """Bin index for each value so that populations differ by at most one.

    Values are ranked with a stable sort, so ties keep their input order.
    The remainder goes to the leftmost bins: 7 values in 3 bins gives
    populations (3, 2, 2).
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if n < n_bins:
        raise ValueError(f"cannot split {n} values into {n_bins} bins")
    base, extra = divmod(n, n_bins)
    sizes = np.full(n_bins, base)
    sizes[:extra] += 1
    order = np.argsort(values, kind="stable")
    out = np.empty(n, dtype=int)
    out[order] = np.repeat(np.arange(n_bins), sizes)
    return out


def bin_statistics(labels: np.ndarray, n_bins: int, *columns: np.ndarray):
    """Per-bin counts, means of every column, and standard error of the last."""
    labels = np.asarray(labels)
    count = np.bincount(labels, minlength=n_bins).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = [np.bincount(labels, weights=c, minlength=n_bins) / count for c in columns]
        y = columns[-1]
        # one refinement pass, so constant bins get an exact mean and zero error
        means[-1] = means[-1] + np.bincount(labels, weights=y - means[-1][labels], minlength=n_bins) / count
        dev2 = np.bincount(labels, weights=(y - means[-1][labels]) ** 2, minlength=n_bins)
        se = np.sqrt(dev2 / (count - 1) / count)
    return count.astype(int), means, se


@dataclass(frozen=True)
class BinnedCurve:
    """Rows of (mean x, mean impact, standard error of the impact, count)."""

    x: np.ndarray
    y: np.ndarray
    se: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        n = len(self.x)
        if not (len(self.y) == len(self.se) == len(self.count) == n):
            raise ValueError("row columns must have equal length")
        if np.any(np.asarray(self.count) < 2):
            raise ValueError("every row needs at least two samples")
        if np.any(np.diff(self.x) < 0):
            raise ValueError("rows must be sorted by x")

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_rows(cls, rows) -> "BinnedCurve":
        arr = np.asarray(rows, dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(int))

    def rows(self) -> list[tuple[float, float, float, int]]:
        return [(float(a), float(b), float(c), int(d)) for a, b, c, d in zip(self.x, self.y, self.se, self.count)]


def impact_curve(
    x, impact, n_bins: int = 50, edges: Optional[Sequence[float]] = None
) -> BinnedCurve:
    """Conditional mean impact given ``x`` (usually the daily fraction).

    Bins are evenly populated unless explicit ``edges`` are given; with
    edges, bin ``i`` holds ``edges[i] <= x < edges[i+1]`` (last bin closed).
    Bins with fewer than two samples are dropped with a warning.
    """
    x = np.asarray(x, dtype=float)
    impact = np.asarray(impact, dtype=float)
    if x.shape != impact.shape:
        raise ValueError("x and impact must have the same shape")
    if edges is None:
        labels = equal_count_bins(x, n_bins)
    else:
        edges = np.asarray(edges, dtype=float)
        n_bins = len(edges) - 1
        if n_bins < 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        inside = (x >= edges[0]) & (x <= edges[-1])
        x, impact = x[inside], impact[inside]
        labels = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    count, (mx, my), se = bin_statistics(labels, n_bins, x, impact)
    keep = count >= 2
    if not keep.all():
        warnings.warn(f"dropped {int((~keep).sum())} bin(s) with fewer than two samples", RuntimeWarning, stacklevel=2)
    order = np.argsort(mx[keep], kind="stable")
    return BinnedCurve(mx[keep][order], my[keep][order], se[keep][order], count[keep][order])
