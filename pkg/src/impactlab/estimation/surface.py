"""Non-parametric impact surface over (eta, F) and fits on top of it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import BinnedCurve, equal_count_bins
from .fitting import FitError, FitResult, get_family, weighted_nls

__all__ = ["SurfaceGrid", "surface_grid", "fit_surface", "residual_map", "LocalExponents", "local_exponent_map"]


@dataclass(frozen=True)
class SurfaceGrid:
    """Cell statistics on an ``n_eta x n_f`` grid of evenly populated marginal bins.

    Arrays have shape ``(n_eta, n_f)``; cells with fewer than two samples
    are marked invalid and hold NaN.
    """

    eta_edges: np.ndarray
    f_edges: np.ndarray
    eta_mean: np.ndarray
    f_mean: np.ndarray
    impact_mean: np.ndarray
    impact_se: np.ndarray
    count: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.count.shape

    @property
    def valid(self) -> np.ndarray:
        return self.count >= 2

    def curve(self, mask=None) -> BinnedCurve:
        """Valid cells (optionally restricted by ``mask``) as fit input with x = (eta, F)."""
        keep = self.valid if mask is None else self.valid & mask
        x = np.column_stack([self.eta_mean[keep], self.f_mean[keep]])
        return _cells(x, self.impact_mean[keep], self.impact_se[keep], self.count[keep])


def _cells(x, y, se, count) -> BinnedCurve:
    # BinnedCurve requires rows sorted by a scalar x; surface rows are
    # ordered cells, so build the record without that check.
    out = object.__new__(BinnedCurve)
    for k, v in (("x", x), ("y", y), ("se", se), ("count", count)):
        object.__setattr__(out, k, v)
    return out


def _edges(values, labels, n):
    lo = np.array([values[labels == k].min() for k in range(n)])
    return np.append(lo, values.max())


def surface_grid(eta, f, impact, n_eta_bins: int = 10, n_f_bins: int = 10) -> SurfaceGrid:
    eta, f, impact = (np.asarray(a, dtype=float) for a in (eta, f, impact))
    if not eta.shape == f.shape == impact.shape:
        raise ValueError("eta, F and impact must have the same shape")
    ie = equal_count_bins(eta, n_eta_bins)
    jf = equal_count_bins(f, n_f_bins)
    cell = ie * n_f_bins + jf
    size = n_eta_bins * n_f_bins
    count = np.bincount(cell, minlength=size).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        m_eta = np.bincount(cell, eta, size) / count
        m_f = np.bincount(cell, f, size) / count
        m_i = np.bincount(cell, impact, size) / count
        dev2 = np.bincount(cell, (impact - m_i[cell]) ** 2, size)
        se = np.sqrt(dev2 / (count - 1) / count)
    bad = count < 2
    for arr in (m_eta, m_f, m_i, se):
        arr[bad] = np.nan
    shape = (n_eta_bins, n_f_bins)
    return SurfaceGrid(
        _edges(eta, ie, n_eta_bins),
        _edges(f, jf, n_f_bins),
        m_eta.reshape(shape),
        m_f.reshape(shape),
        m_i.reshape(shape),
        se.reshape(shape),
        count.astype(int).reshape(shape),
    )


def fit_surface(eta, f, impact, n_eta_bins: int = 10, n_f_bins: int = 10, family="double_power", init=None):
    """Grid the samples and fit ``family`` to the valid cell means."""
    grid = surface_grid(eta, f, impact, n_eta_bins, n_f_bins)
    fam = get_family(family)
    if fam.ndim != 2:
        raise ValueError(f"{fam.name} is not a surface family")
    return grid, weighted_nls(fam, grid.curve(), init)


def residual_map(fit: FitResult, grid: SurfaceGrid) -> np.ndarray:
    """``(impact_mean - model) / impact_se`` per cell; NaN for invalid cells.

    A cell with zero standard error reads 0 when the model matches it to
    rounding and +-inf otherwise.
    """
    x = np.column_stack([grid.eta_mean.ravel(), grid.f_mean.ravel()])
    out = np.full(x.shape[0], np.nan)
    valid = grid.valid.ravel()
    diff = grid.impact_mean.ravel()[valid] - fit.predict(x[valid])
    se = grid.impact_se.ravel()[valid]
    exact = np.abs(diff) <= 1e-12 * np.maximum(np.abs(grid.impact_mean.ravel()[valid]), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = diff / se
        r = np.where(se == 0, np.where(exact, 0.0, np.copysign(np.inf, diff)), r)
    out[valid] = r
    return out.reshape(grid.shape)


@dataclass(frozen=True)
class LocalExponents:
    """Local exponents of ``C eta**delta F**(1-gamma)`` around every cell.

    ``gamma1`` is the fitted F exponent (``1 - gamma``).  Flagged cells had
    a degenerate neighbourhood or a failed fit and hold NaN.
    """

    grid: SurfaceGrid
    delta: np.ndarray
    gamma1: np.ndarray
    flagged: np.ndarray

    @property
    def gamma(self) -> np.ndarray:
        return 1.0 - self.gamma1


def local_exponent_map(eta, f, impact, n1: int = 10, n2: int = 10, window: int = 5) -> LocalExponents:
    """Fit ``C eta**delta F**gamma1`` on the ``window x window`` cell square
    centred at each cell; squares are truncated at the grid edges."""
    if window < 1:
        raise ValueError("window must be >= 1")
    grid = surface_grid(eta, f, impact, n1, n2)
    half = window // 2
    delta = np.full((n1, n2), np.nan)
    gamma1 = np.full((n1, n2), np.nan)
    flagged = np.zeros((n1, n2), dtype=bool)
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    for i in range(n1):
        for j in range(n2):
            lo_i, hi_i = i - half, i - half + window - 1
            lo_j, hi_j = j - half, j - half + window - 1
            mask = (ii >= lo_i) & (ii <= hi_i) & (jj >= lo_j) & (jj <= hi_j)
            cur = grid.curve(mask)
            if (
                len(cur.y) < 3
                or np.unique(cur.x[:, 0]).size < 2
                or np.unique(cur.x[:, 1]).size < 2
                or np.any(~(cur.se > 0))
            ):
                flagged[i, j] = True
                continue
            try:
                res = weighted_nls("double_power", cur)
            except (FitError, ValueError, ArithmeticError):
                flagged[i, j] = True
                continue
            delta[i, j] = res.params["delta"]
            gamma1[i, j] = res.params["gamma1"]
    return LocalExponents(grid, delta, gamma1, flagged)
