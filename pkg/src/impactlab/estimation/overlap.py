"""How often metaorders run concurrently, and whether they share a sign."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Metaorder

__all__ = ["DEFAULT_DURATION_BINS", "OverlapRow", "overlap_stats"]

DEFAULT_DURATION_BINS = (0, 10, 25, 50, 100, 200, 390)  # minutes


@dataclass(frozen=True)
class OverlapRow:
    duration_range: tuple[float, float]
    count: int
    mean_overlaps: float
    same_sign_fraction: float
    opposite_sign_fraction: float


def overlap_stats(
    orders: Sequence[Metaorder],
    horizon_multiple: float = 3.0,
    duration_bins: Sequence[float] = DEFAULT_DURATION_BINS,
) -> list[OverlapRow]:
    """Per duration bin: mean number of overlapping orders and sign agreement.

    Order ``j`` overlaps order ``i`` when both trade the same symbol on the
    same day and ``j``'s execution interval meets ``i``'s window
    ``[start, start + horizon_multiple * duration)`` in wall-clock minutes.
    Fractions are pooled over all overlaps in the bin and are NaN when a
    bin has none.
    """
    n = len(orders)
    n_over = np.zeros(n, dtype=int)
    n_same = np.zeros(n, dtype=int)
    groups: dict = {}
    for k, o in enumerate(orders):
        groups.setdefault((o.symbol, o.day), []).append(k)
    for idx in groups.values():
        idx = np.asarray(idx)
        start = np.array([orders[k].start_minute for k in idx])
        end = np.array([orders[k].end_minute for k in idx])
        sign = np.array([orders[k].sign for k in idx])
        w_end = start + horizon_multiple * (end - start)
        meets = (start[None, :] < w_end[:, None]) & (end[None, :] > start[:, None])
        np.fill_diagonal(meets, False)
        n_over[idx] = meets.sum(axis=1)
        n_same[idx] = (meets & (sign[None, :] == sign[:, None])).sum(axis=1)
    dur = np.array([o.duration_minutes for o in orders], dtype=float)
    edges = np.asarray(duration_bins, dtype=float)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (dur > lo) & (dur <= hi) if lo > edges[0] else (dur >= lo) & (dur <= hi)
        total = int(n_over[m].sum())
        same = int(n_same[m].sum())
        frac = same / total if total else float("nan")
        rows.append(
            OverlapRow(
                (float(lo), float(hi)),
                int(m.sum()),
                float(n_over[m].mean()) if m.any() else float("nan"),
                frac,
                1.0 - frac if total else float("nan"),
            )
        )
    return rows
