"""Volume clock, execution descriptors, volatility proxy and data filters."""
from __future__ import annotations

import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "MinuteBar",
    "DayBars",
    "Metaorder",
    "VolumeClock",
    "ExecutionDescriptors",
    "DayContext",
    "FilterConfig",
    "FilterReport",
    "ImpactPath",
    "minute_of_day",
    "build_volume_clock",
    "daily_volatility_proxy",
    "build_day_context",
    "compute_descriptors",
    "apply_filters",
    "impact_series",
    "MARKET_OPEN",
    "MARKET_CLOSE",
]

MARKET_OPEN = 9 * 60 + 30
MARKET_CLOSE = 16 * 60
FILTER_NAMES = ("filter1", "filter2", "filter3", "no-data", "filter4")


def minute_of_day(t: dt.datetime | dt.time) -> float:
    return t.hour * 60 + t.minute + t.second / 60.0 + t.microsecond / 6e7


@dataclass(frozen=True)
class MinuteBar:
    date: dt.date
    time: int  # minute of day at which the bar opens
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        if not (self.low <= min(self.open, self.close) and max(self.open, self.close) <= self.high):
            raise ValueError(f"inconsistent OHLC at {self.date} {self.time}")
        if self.volume < 0:
            raise ValueError("negative volume")


@dataclass(frozen=True)
class DayBars:
    """Columnar minute bars for one trading day.

    ``time`` holds the opening minute of each bar; the bar covers
    ``[time, time + 1)``.
    """

    date: dt.date
    time: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        n = len(self.time)
        if n == 0:
            raise ValueError("empty day")
        for name in ("open", "high", "low", "close", "volume"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        if np.any(np.diff(self.time) <= 0):
            raise ValueError("bars must be strictly increasing in time")
        if np.any(self.volume < 0):
            raise ValueError("negative volume")
        lo = np.minimum(self.open, self.close)
        hi = np.maximum(self.open, self.close)
        if np.any(self.low > lo) or np.any(self.high < hi):
            raise ValueError("inconsistent OHLC")

    @classmethod
    def from_bars(cls, bars: Sequence[MinuteBar]) -> "DayBars":
        if not bars:
            raise ValueError("empty day")
        dates = {b.date for b in bars}
        if len(dates) != 1:
            raise ValueError("bars span more than one day")
        cols = np.array([(b.time, b.open, b.high, b.low, b.close, b.volume) for b in bars], dtype=float)
        return cls(bars[0].date, cols[:, 0].astype(int), *(cols[:, i] for i in range(1, 6)))

    def __len__(self):
        return len(self.time)

    def to_bars(self) -> list[MinuteBar]:
        return [
            MinuteBar(self.date, int(t), float(o), float(h), float(l), float(c), float(v))
            for t, o, h, l, c, v in zip(self.time, self.open, self.high, self.low, self.close, self.volume)
        ]


def _as_day(bars) -> DayBars:
    return bars if isinstance(bars, DayBars) else DayBars.from_bars(list(bars))


@dataclass(frozen=True)
class Metaorder:
    symbol: str
    sign: int
    volume: float
    start: dt.datetime
    end: dt.datetime

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if not self.volume > 0:
            raise ValueError("volume must be positive")
        if not self.start < self.end:
            raise ValueError("start must precede end")
        if self.start.date() != self.end.date():
            raise ValueError("metaorder must lie within one trading day")

    @property
    def day(self) -> dt.date:
        return self.start.date()

    @property
    def start_minute(self) -> float:
        return minute_of_day(self.start)

    @property
    def end_minute(self) -> float:
        return minute_of_day(self.end)

    @property
    def duration_minutes(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0


@dataclass(frozen=True)
class VolumeClock:
    """Piecewise-linear map from minute of day to volume time.

    ``knots`` are minute instants (open of the first bar through the close of
    the last one) and ``cumulative`` the traded-volume fraction reached at
    each of them.
    """

    day: dt.date
    knots: np.ndarray
    cumulative: np.ndarray
    total_volume: float

    def __post_init__(self):
        if self.cumulative[0] != 0.0 or self.cumulative[-1] != 1.0:
            raise ValueError("volume clock must run from 0 to 1")
        if np.any(np.diff(self.cumulative) < 0):
            raise ValueError("volume clock must be non-decreasing")

    def volume_time(self, minute):
        """v(t); clamps to 0 before the open and 1 after the close."""
        return np.interp(minute, self.knots, self.cumulative)

    def market_volume(self, minute):
        """V(t), shares traded since the open."""
        return self.volume_time(minute) * self.total_volume

    def wall_time(self, v):
        """Smallest minute at which volume time reaches ``v``."""
        v = np.asarray(v, dtype=float)
        idx = np.searchsorted(self.cumulative, v, side="left")
        idx = np.clip(idx, 1, len(self.knots) - 1)
        c0, c1 = self.cumulative[idx - 1], self.cumulative[idx]
        t0, t1 = self.knots[idx - 1], self.knots[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(c1 > c0, (v - c0) / (c1 - c0), 0.0)
        out = t0 + w * (t1 - t0)
        out = np.where(v <= 0, self.knots[0], out)
        return np.where(v >= 1, self.knots[np.argmax(self.cumulative >= 1.0)], out)

    def resampled(self, minutes: np.ndarray) -> "VolumeClock":
        """Clock rebuilt from its own values at ``minutes`` (must include the ends)."""
        return VolumeClock(self.day, np.asarray(minutes, float), self.volume_time(minutes), self.total_volume)


def _full_minute_grid(day: DayBars):
    first, last = int(day.time[0]), int(day.time[-1])
    minutes = np.arange(first, last + 1)
    pos = day.time.astype(int) - first
    return minutes, pos


def build_volume_clock(bars) -> VolumeClock:
    """Cumulative traded-volume fraction at every minute boundary of the day.

    Minutes without a bar contribute zero volume.  Raises ``ValueError`` on a
    day with zero total volume.
    """
    day = _as_day(bars)
    total = float(np.sum(day.volume))
    if not total > 0:
        raise ValueError(f"zero total volume on {day.date}")
    minutes, pos = _full_minute_grid(day)
    per_minute = np.zeros(len(minutes))
    per_minute[pos] = day.volume
    running = np.cumsum(per_minute)
    # Normalise by the running sum itself; np.sum rounds differently and could push a knot past 1.
    cum = np.concatenate([[0.0], running]) / running[-1]
    knots = np.concatenate([minutes, [minutes[-1] + 1]]).astype(float)
    return VolumeClock(day.date, knots, cum, total)


def daily_volatility_proxy(bars) -> float:
    """(max high - min low) / first open of the day."""
    day = _as_day(bars)
    first_open = float(day.open[0])
    if not first_open > 0:
        raise ValueError("first open must be positive")
    return float((np.max(day.high) - np.min(day.low)) / first_open)


@dataclass(frozen=True)
class ExecutionDescriptors:
    eta: float
    duration_f: float
    pi: float

    def __post_init__(self):
        if not (self.eta > 0 and self.duration_f > 0 and self.pi > 0):
            raise ValueError("descriptors must be positive")
        if not math.isclose(self.pi, self.eta * self.duration_f, rel_tol=1e-12):
            raise ValueError("pi must equal eta * F")


@dataclass(frozen=True)
class DayContext:
    """Everything needed to measure impact on one symbol-day.

    ``log_price`` is sampled at the clock knots: the first open, then the
    close of each minute.  Minutes without a bar are filled by linear
    interpolation and recorded in ``gap_mask``.
    """

    sigma_d: float
    clock: VolumeClock
    log_price: np.ndarray
    gap_mask: np.ndarray = field(repr=False)

    @property
    def date(self) -> dt.date:
        return self.clock.day

    @property
    def knots(self) -> np.ndarray:
        return self.clock.knots

    @property
    def v(self) -> np.ndarray:
        return self.clock.cumulative

    @property
    def s(self) -> np.ndarray:
        """Log price rescaled by the daily volatility proxy."""
        return self.log_price / self.sigma_d

    @property
    def has_gaps(self) -> bool:
        return bool(self.gap_mask.any())


def build_day_context(bars) -> DayContext:
    day = _as_day(bars)
    if np.any(day.open <= 0) or np.any(day.close <= 0):
        raise ValueError("prices must be positive")
    clock = build_volume_clock(day)
    sigma = daily_volatility_proxy(day)
    minutes, pos = _full_minute_grid(day)
    closes = np.full(len(minutes), np.nan)
    closes[pos] = day.close
    gap = np.isnan(closes)
    if gap.any():
        ok = ~gap
        closes[gap] = np.interp(minutes[gap], minutes[ok], closes[ok])
    log_price = np.log(np.concatenate([[day.open[0]], closes]))
    gap_mask = np.concatenate([[False], gap])
    return DayContext(sigma, clock, log_price, gap_mask)


def compute_descriptors(order: Metaorder, clock: VolumeClock) -> ExecutionDescriptors:
    """Participation rate, volume-time duration and daily fraction of ``order``."""
    if order.day != clock.day:
        raise ValueError(f"order on {order.day} does not belong to clock of {clock.day}")
    v_s, v_e = clock.volume_time([order.start_minute, order.end_minute])
    traded = (v_e - v_s) * clock.total_volume
    if not traded > 0:
        raise ValueError("no market volume during the execution window")
    pi = order.volume / clock.total_volume
    eta = order.volume / traded
    return ExecutionDescriptors(eta=eta, duration_f=traded / clock.total_volume, pi=pi)


@dataclass(frozen=True)
class FilterConfig:
    symbol_whitelist: Optional[frozenset] = None
    latest_end: float = 16 * 60 + 1
    min_duration_minutes: float = 2.0
    max_eta: float = 0.3

    def __post_init__(self):
        if not 0 < self.max_eta <= 1:
            raise ValueError("max_eta must lie in (0, 1]")
        if self.symbol_whitelist is not None and not isinstance(self.symbol_whitelist, frozenset):
            object.__setattr__(self, "symbol_whitelist", frozenset(self.symbol_whitelist))


@dataclass
class FilterReport:
    survivors: list  # (Metaorder, ExecutionDescriptors)
    rejections: Counter
    n_input: int

    def stage_counts(self) -> tuple[int, ...]:
        """Orders remaining after: raw, filter 1, 2, 3, 4 (no-data folded into 4)."""
        counts = [self.n_input]
        left = self.n_input
        for name in ("filter1", "filter2", "filter3"):
            left -= self.rejections.get(name, 0)
            counts.append(left)
        left -= self.rejections.get("no-data", 0) + self.rejections.get("filter4", 0)
        counts.append(left)
        return tuple(counts)


def apply_filters(
    orders: Iterable[Metaorder],
    contexts: Mapping[tuple[str, dt.date], DayContext],
    cfg: FilterConfig = FilterConfig(),
) -> FilterReport:
    """Run the four selection filters in order.

    Filter 1 keeps whitelisted symbols, filter 2 orders ending before
    ``latest_end``, filter 3 orders longer than ``min_duration_minutes`` and
    filter 4 orders with participation below ``max_eta``.  Orders with no
    usable day context (missing, or a flat day with zero volatility proxy)
    are counted under ``"no-data"`` just before filter 4.
    """
    survivors = []
    rejected: Counter = Counter()
    n = 0
    for order in orders:
        n += 1
        if cfg.symbol_whitelist is not None and order.symbol not in cfg.symbol_whitelist:
            rejected["filter1"] += 1
            continue
        if not order.end_minute < cfg.latest_end:
            rejected["filter2"] += 1
            continue
        if not order.duration_minutes > cfg.min_duration_minutes:
            rejected["filter3"] += 1
            continue
        ctx = contexts.get((order.symbol, order.day))
        if ctx is None or not ctx.sigma_d > 0:
            rejected["no-data"] += 1
            continue
        try:
            desc = compute_descriptors(order, ctx.clock)
        except ValueError:
            rejected["no-data"] += 1
            continue
        if not desc.eta < cfg.max_eta:
            rejected["filter4"] += 1
            continue
        survivors.append((order, desc))
    return FilterReport(survivors, rejected, n)


@dataclass(frozen=True)
class ImpactPath:
    """Signed, volatility-rescaled price path of one metaorder."""

    v: np.ndarray  # absolute volume time; following days are offset by +1, +2, ...
    impact: np.ndarray
    v_start: float
    v_end: float
    interpolated: bool = False

    @property
    def duration_f(self) -> float:
        return self.v_end - self.v_start

    def at(self, v):
        return np.interp(v, self.v, self.impact, right=np.nan)

    @property
    def temporary(self) -> float:
        return float(np.interp(self.v_end, self.v, self.impact))


def impact_series(
    order: Metaorder,
    ctx: DayContext,
    horizon: Optional[float] = None,
    following: Sequence[DayContext] = (),
) -> ImpactPath:
    """Sampled ``sign * (s(v) - s(v_s))`` from the order start up to ``horizon``.

    Samples fall on minute boundaries in volume time.  ``horizon`` defaults
    to the end of execution; values beyond 1 need ``following`` day contexts
    and are rescaled by the order day's volatility proxy (the overnight
    return is included).
    """
    clock = ctx.clock
    t_s, t_e = order.start_minute, order.end_minute
    v_s, v_e = (float(x) for x in clock.volume_time([t_s, t_e]))
    if horizon is None:
        horizon = v_e
    if horizon < v_e:
        raise ValueError("horizon must reach the end of execution")
    s = ctx.s
    s_start = float(np.interp(t_s, clock.knots, s))
    inside = (clock.knots > t_s) & (clock.cumulative <= horizon)
    v = np.concatenate([[v_s], clock.cumulative[inside]])
    vals = np.concatenate([[s_start], s[inside]])
    gaps = bool(ctx.gap_mask[inside].any())
    for k, nxt in enumerate(following, start=1):
        if v[-1] >= horizon:
            break
        keep = nxt.clock.cumulative + k <= horizon
        v = np.concatenate([v, nxt.clock.cumulative[keep] + k])
        vals = np.concatenate([vals, nxt.log_price[keep] / ctx.sigma_d])
        gaps = gaps or bool(nxt.gap_mask[keep].any())
    return ImpactPath(v, order.sign * (vals - s_start), v_s, v_e, gaps)
