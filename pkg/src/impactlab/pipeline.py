"""From metaorders and minute bars to per-order impact measurements."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import DayBars, FilterConfig, FilterReport, Metaorder, apply_filters, build_day_context, impact_series
from .estimation.paths import collect_paths
from .synth import ImpactModel, PopulationConfig, iter_market

__all__ = ["Dataset", "measure", "synthetic_dataset", "merge_reports"]


@dataclass
class Dataset:
    """Filtered metaorders with their descriptors and measured impacts.

    ``paths`` is filled only when a relaxation horizon was requested.
    """

    orders: list
    eta: np.ndarray
    duration_f: np.ndarray
    pi: np.ndarray
    temporary: np.ndarray
    report: FilterReport
    paths: Optional[list] = None
    truth: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return len(self.orders)


def merge_reports(reports: Iterable[FilterReport]) -> FilterReport:
    survivors: list = []
    rejections: Counter = Counter()
    n = 0
    for r in reports:
        survivors.extend(r.survivors)
        rejections.update(r.rejections)
        n += r.n_input
    return FilterReport(survivors, rejections, n)


class _Collector:
    def __init__(self, with_paths: bool):
        self.orders, self.eta, self.f, self.pi, self.temp, self.truth = [], [], [], [], [], []
        self.paths = [] if with_paths else None
        self.reports = []

    def add(self, report, contexts, horizon_multiple, cross_day, truth=None):
        self.reports.append(report)
        paths = (
            collect_paths(report.survivors, contexts, horizon_multiple, cross_day)
            if self.paths is not None
            else None
        )
        for k, (order, desc) in enumerate(report.survivors):
            ctx = contexts[(order.symbol, order.day)]
            self.orders.append(order)
            self.eta.append(desc.eta)
            self.f.append(desc.duration_f)
            self.pi.append(desc.pi)
            self.temp.append(paths[k].temporary if paths else impact_series(order, ctx).temporary)
            if truth is not None:
                self.truth.append(truth[k])
        if paths:
            self.paths.extend(paths)

    def dataset(self) -> Dataset:
        rep = merge_reports(self.reports)
        return Dataset(
            self.orders,
            np.array(self.eta, dtype=float),
            np.array(self.f, dtype=float),
            np.array(self.pi, dtype=float),
            np.array(self.temp, dtype=float),
            rep,
            self.paths,
            np.array(self.truth, dtype=float) if self.truth else None,
        )


def measure(
    orders: Iterable[Metaorder],
    bars: Mapping[tuple, DayBars],
    filters: FilterConfig = FilterConfig(),
    horizon_multiple: Optional[float] = None,
    cross_day: bool = False,
) -> Dataset:
    """Filter ``orders`` against per-(symbol, date) bars and measure impacts."""
    contexts = {key: build_day_context(day) for key, day in bars.items()}
    col = _Collector(horizon_multiple is not None)
    col.add(apply_filters(orders, contexts, filters), contexts, horizon_multiple or 1.0, cross_day)
    return col.dataset()


def synthetic_dataset(
    cfg: PopulationConfig,
    model: ImpactModel,
    noise_scale: float = 1.0,
    filters: FilterConfig = FilterConfig(),
    horizon_multiple: Optional[float] = None,
) -> Dataset:
    """Generate a synthetic market and run it through the measurement pipeline.

    Days are processed one at a time and then discarded, so memory stays
    flat in the number of days.  Paths (when requested) stop at the close.
    ``truth`` holds each survivor's model temporary impact.
    """
    col = _Collector(horizon_multiple is not None)
    for day in iter_market(cfg, model, noise_scale=noise_scale):
        ctx = build_day_context(day.bars)
        contexts = {(day.symbol, day.date): ctx}
        report = apply_filters([o.order for o in day.orders], contexts, filters)
        lookup = {id(o.order): o for o in day.orders}
        truth = [
            float(model.temporary(lookup[id(order)].descriptors.eta, lookup[id(order)].descriptors.duration_f))
            for order, _ in report.survivors
        ]
        col.add(report, contexts, horizon_multiple or 1.0, False, truth)
    return col.dataset()
