"""Average impact trajectories during execution and relaxation after it."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..core import DayContext, ExecutionDescriptors, ImpactPath, Metaorder, impact_series

__all__ = [
    "DECAY_Z_GRID",
    "DecayCurve",
    "TrajectoryCurve",
    "collect_paths",
    "decay_curves",
    "trajectory_curves",
]

DECAY_Z_GRID = np.arange(1, 61) / 20.0  # 60 points on (0, 3]
MIN_TEMPORARY = 1e-9


def collect_paths(
    survivors: Sequence[tuple[Metaorder, ExecutionDescriptors]],
    contexts: Mapping,
    horizon_multiple: float = 3.0,
    cross_day: bool = False,
) -> list[ImpactPath]:
    """Impact paths running to ``v_s + horizon_multiple * F``.

    Without ``cross_day`` a path stops at the close, so no overnight return
    enters it.  With ``cross_day`` the following sessions present in
    ``contexts`` (keyed by ``(symbol, date)``) are appended.
    """
    by_symbol: dict[str, list] = {}
    for sym, date in contexts:
        by_symbol.setdefault(sym, []).append(date)
    for dates in by_symbol.values():
        dates.sort()
    out = []
    for order, desc in survivors:
        ctx = contexts[(order.symbol, order.day)]
        v_s = float(ctx.clock.volume_time(order.start_minute))
        horizon = v_s + horizon_multiple * desc.duration_f
        following: list[DayContext] = []
        if cross_day and horizon > 1:
            dates = by_symbol[order.symbol]
            k = dates.index(order.day)
            following = [contexts[(order.symbol, d)] for d in dates[k + 1: k + 1 + int(np.ceil(horizon - 1))]]
        else:
            horizon = min(horizon, 1.0)
        out.append(impact_series(order, ctx, max(horizon, float(ctx.clock.volume_time(order.end_minute))), following))
    return out


def _bin_index(values, edges):
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.where(values == edges[-1], len(edges) - 2, idx)
    return np.where((values < edges[0]) | (values > edges[-1]), -1, idx)


@dataclass(frozen=True)
class TrajectoryCurve:
    """Mean immediate impact against elapsed volume time for one F bin."""

    f_range: tuple[float, float]
    v: np.ndarray
    impact: np.ndarray
    se: np.ndarray
    count: np.ndarray
    marker_f: float
    marker_impact: float
    n_orders: int


def _mean_se(values: np.ndarray):
    # column-wise mean and standard error ignoring NaN entries
    ok = np.isfinite(values)
    n = ok.sum(axis=0)
    filled = np.where(ok, values, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = filled.sum(axis=0) / n
        dev = np.where(ok, values - mean, 0.0)
        se = np.sqrt((dev**2).sum(axis=0) / (n - 1) / n)
    return mean, se, n


def trajectory_curves(
    paths: Sequence[ImpactPath],
    eta,
    eta_range: tuple[float, float],
    f_edges,
    n_points: int = 50,
) -> list[TrajectoryCurve]:
    """Average ``I(v)`` per duration bin among orders with ``eta`` in ``eta_range``.

    Each curve runs over elapsed volume time ``[0, upper F edge]``; an order
    contributes wherever its path has data.  The marker is the bin's mean
    duration and mean temporary impact.  Empty bins are dropped.
    """
    eta = np.asarray(eta, dtype=float)
    f = np.array([p.duration_f for p in paths])
    sel = (eta >= eta_range[0]) & (eta <= eta_range[1])
    bins = _bin_index(f, f_edges)
    out = []
    for k in range(len(f_edges) - 1):
        members = np.flatnonzero(sel & (bins == k))
        if members.size == 0:
            continue
        grid = np.linspace(0.0, float(f_edges[k + 1]), n_points)
        vals = np.array([paths[m].at(paths[m].v_start + grid) for m in members])
        mean, se, n = _mean_se(vals)
        temps = np.array([paths[m].temporary for m in members])
        out.append(
            TrajectoryCurve(
                (float(f_edges[k]), float(f_edges[k + 1])),
                grid,
                mean,
                se,
                n,
                float(f[members].mean()),
                float(temps.mean()),
                int(members.size),
            )
        )
    return out


@dataclass(frozen=True)
class DecayCurve:
    """Normalised impact ``I_ren(z) = mean I(z F) / mean I(F)`` for one group.

    The ratio of group means equals 1 at ``z = 1`` by construction.  At each
    ``z`` only orders whose path reaches ``z`` enter both numerator and
    denominator; ``se`` is the delta-method error of that ratio.
    """

    z_grid: np.ndarray
    i_ren: np.ndarray
    se: np.ndarray
    count: np.ndarray
    eta_range: tuple[float, float]
    f_range: tuple[float, float]
    n_orders: int
    n_excluded: int


def _decay(paths, members, z_grid, eta_range, f_range) -> DecayCurve:
    temps = np.array([paths[m].temporary for m in members]) if len(members) else np.zeros(0)
    keep = np.abs(temps) >= MIN_TEMPORARY
    excluded = int((~keep).sum())
    members = np.asarray(members)[keep]
    temps = temps[keep]
    if members.size == 0:
        nan = np.full(z_grid.shape, np.nan)
        return DecayCurve(z_grid, nan, nan, np.zeros(z_grid.shape, int), eta_range, f_range, 0, excluded)
    vals = np.array([paths[m].at(paths[m].v_start + z_grid * paths[m].duration_f) for m in members])
    ok = np.isfinite(vals)
    n = ok.sum(axis=0)
    den_each = np.where(ok, temps[:, None], 0.0)
    num = np.where(ok, vals, 0.0).sum(axis=0)
    den = den_each.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = num / den
        resid = np.where(ok, vals - ratio * temps[:, None], 0.0)
        se = np.sqrt((resid**2).sum(axis=0) / (n * (n - 1))) / np.abs(den / n)
    at_one = np.isclose(z_grid, 1.0, rtol=0, atol=1e-12)
    ratio[at_one] = 1.0
    return DecayCurve(z_grid, ratio, se, n, eta_range, f_range, int(members.size), excluded)


def decay_curves(
    paths: Sequence[ImpactPath],
    eta,
    eta_edges,
    f_edges,
    z_grid: Optional[np.ndarray] = None,
    aggregate: bool = False,
) -> list[DecayCurve]:
    """Decay curves per (eta, F) bin, plus one over all orders if ``aggregate``.

    Orders with ``|I(1)| < 1e-9`` are excluded and counted in
    ``n_excluded``.  Paths are already signed, so buy and sell orders fold
    together.
    """
    z_grid = DECAY_Z_GRID if z_grid is None else np.asarray(z_grid, dtype=float)
    eta = np.asarray(eta, dtype=float)
    f = np.array([p.duration_f for p in paths])
    ie = _bin_index(eta, eta_edges)
    jf = _bin_index(f, f_edges)
    out = []
    for i in range(len(eta_edges) - 1):
        for j in range(len(f_edges) - 1):
            members = np.flatnonzero((ie == i) & (jf == j))
            if members.size == 0:
                continue
            out.append(
                _decay(
                    paths,
                    members,
                    z_grid,
                    (float(eta_edges[i]), float(eta_edges[i + 1])),
                    (float(f_edges[j]), float(f_edges[j + 1])),
                )
            )
    if aggregate:
        out.append(_decay(paths, np.arange(len(paths)), z_grid, (float(eta.min()), float(eta.max())),
                          (float(f.min()), float(f.max()))))
    return out
