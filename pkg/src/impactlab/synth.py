"""Synthetic metaorder populations and minute-bar markets.

Populations draw participation rate and volume-time duration independently
from truncated power laws and give same-day orders a common "mood" sign.
Markets superpose each order's model trajectory on a Wiener path in volume
time and emit minute bars whose volatility proxy reproduces the rescaled
units the impact was generated in.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Protocol, Sequence

import numpy as np

from .core import (
    MARKET_OPEN,
    DayBars,
    ExecutionDescriptors,
    Metaorder,
    VolumeClock,
    build_volume_clock,
    compute_descriptors,
)
from .models import PropagatorParams, alpha_trajectory
from .special import DomainError

__all__ = [
    "PowerLaw",
    "PopulationConfig",
    "SyntheticOrder",
    "SyntheticMarketDay",
    "ImpactModel",
    "PropagatorModel",
    "LogCurveModel",
    "PowerCurveModel",
    "DoublePowerModel",
    "DoubleLogModel",
    "sample_trunc_power",
    "trunc_power_cdf",
    "trunc_power_mean",
    "mood_match_probability",
    "volume_profile",
    "generate_population",
    "generate_market",
    "iter_market",
    "PAPER_ETA_LAW",
    "PAPER_F_LAW",
]

MINUTES_PER_DAY = 390


@dataclass(frozen=True)
class PowerLaw:
    """Density proportional to x**exponent on [lower, upper]."""

    exponent: float
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 < self.lower < self.upper:
            raise DomainError("need 0 < lower < upper")
        if not math.isfinite(self.exponent):
            raise DomainError("exponent must be finite")


PAPER_ETA_LAW = PowerLaw(-0.864, 1e-4, 0.3)
PAPER_F_LAW = PowerLaw(-0.932, 3.0 / MINUTES_PER_DAY, 1.0)


def _log_case(exponent: float) -> bool:
    return abs(exponent + 1.0) < 1e-12


def trunc_power_cdf(exponent: float, lo: float, hi: float, x):
    x = np.clip(np.asarray(x, dtype=float), lo, hi)
    if _log_case(exponent):
        return np.log(x / lo) / math.log(hi / lo)
    e1 = exponent + 1.0
    return (x**e1 - lo**e1) / (hi**e1 - lo**e1)


def trunc_power_mean(exponent: float, lo: float, hi: float) -> float:
    if _log_case(exponent):
        return (hi - lo) / math.log(hi / lo)
    e1, e2 = exponent + 1.0, exponent + 2.0
    if abs(e2) < 1e-12:
        num = math.log(hi / lo)
    else:
        num = (hi**e2 - lo**e2) / e2
    return num / ((hi**e1 - lo**e1) / e1)


def sample_trunc_power(exponent: float, lo: float, hi: float, rng: np.random.Generator, size=None):
    """Inverse-CDF draw(s) from x**exponent truncated to [lo, hi]."""
    if not lo > 0:
        raise DomainError("lower bound must be positive")
    if not lo < hi:
        raise DomainError("need lo < hi")
    u = rng.random(size)
    if _log_case(exponent):
        return lo * (hi / lo) ** u
    e1 = exponent + 1.0
    a, b = lo**e1, hi**e1
    return (a + u * (b - a)) ** (1.0 / e1)


def mood_match_probability(p_same: float) -> float:
    """Per-order probability of following the day's mood.

    Chosen so that two same-day orders share a sign with probability
    ``p_same``: q**2 + (1 - q)**2 = p_same.
    """
    if not 0.5 <= p_same <= 1.0:
        raise DomainError("p_same must lie in [0.5, 1]")
    return 0.5 * (1.0 + math.sqrt(2.0 * p_same - 1.0))


def volume_profile(kind: str = "flat", minutes: int = MINUTES_PER_DAY, depth: float = 2.0) -> np.ndarray:
    """Per-minute share of daily volume; ``"u"`` is heavier at open and close."""
    if kind == "flat":
        w = np.ones(minutes)
    elif kind == "u":
        x = (np.arange(minutes) + 0.5) / minutes
        w = 1.0 + depth * (2.0 * x - 1.0) ** 2
    else:
        raise ValueError(f"unknown volume profile {kind!r}")
    return w / w.sum()


@dataclass(frozen=True)
class PopulationConfig:
    n_orders: int
    eta_law: PowerLaw = PAPER_ETA_LAW
    f_law: PowerLaw = PAPER_F_LAW
    herding_p_same: float = 0.55
    days: int = 100
    seed: int = 0
    symbols: tuple = ("SYN",)
    profile: str = "flat"
    daily_volume: float = 1e7
    first_day: dt.date = dt.date(2008, 1, 2)

    def __post_init__(self):
        if self.n_orders < 0 or self.days < 1:
            raise ValueError("need n_orders >= 0 and days >= 1")
        mood_match_probability(self.herding_p_same)
        if self.eta_law.upper > 1 or self.f_law.upper > 1:
            raise DomainError("eta and F laws must live in (0, 1]")
        volume_profile(self.profile)


@dataclass(frozen=True)
class SyntheticOrder:
    order: Metaorder
    descriptors: ExecutionDescriptors
    day_index: int
    v_start: float


class ImpactModel(Protocol):
    name: str

    def trajectory(self, eta: np.ndarray, f: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Impact in rescaled units at z = (v - v_s)/F; z <= 0 gives 0."""

    def temporary(self, eta, f):
        ...


@dataclass(frozen=True)
class PropagatorModel:
    """Power-law propagator with an (alpha)-family schedule."""

    delta: float = 0.5
    gamma: float = 0.5
    alpha: float = 0.0
    name: str = "propagator"
    _shape: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        PropagatorParams(self.delta, self.gamma, self.alpha)
        if self.alpha != 0:
            # unit-prefactor shape on a dense grid; trajectories factorise
            z = np.unique(np.concatenate([np.linspace(0.0, 4.0, 8001), np.geomspace(4.0, 1e5, 4000)]))
            p = PropagatorParams(self.delta, self.gamma, self.alpha, 1.0, 1.0)
            object.__setattr__(self, "_shape", (z, alpha_trajectory(p, z)))

    def trajectory(self, eta, f, z):
        eta, f, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (eta, f, z)))
        zc = np.clip(z, 0.0, None)
        pref = eta**self.delta * f ** (1 - self.gamma)
        if self.alpha == 0:
            g = 1 - self.gamma
            shape = np.where(zc <= 1, zc**g, zc**g - np.clip(zc - 1, 0, None) ** g) / g
        else:
            grid, vals = self._shape
            shape = np.interp(zc, grid, vals)
        return pref * shape

    def temporary(self, eta, f):
        eta, f = np.asarray(eta, float), np.asarray(f, float)
        a, d, g = self.alpha, self.delta, self.gamma
        return eta**d * f ** (1 - g) * (1 + a) ** d / (1 + a * d - g)


class _BuildUpModel:
    """Impact given by a temporary-impact function, reached by VWAP build-up.

    During execution the impact equals the temporary impact of the part
    already traded (duration ``z*F``); afterwards it relaxes with the
    square-root propagator shape ``sqrt(z) - sqrt(z - 1)``.
    """

    def temporary(self, eta, f):
        raise NotImplementedError

    def trajectory(self, eta, f, z):
        eta, f, z = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (eta, f, z)))
        zc = np.clip(z, 0.0, None)
        build = self.temporary(eta, f * np.minimum(zc, 1.0))
        decay = np.sqrt(zc) - np.sqrt(np.clip(zc - 1.0, 0.0, None))
        return np.where(zc <= 1, build, build * decay)


@dataclass(frozen=True)
class LogCurveModel(_BuildUpModel):
    """Temporary impact a*log10(1 + b*pi)."""

    a: float = 0.028
    b: float = 465.0
    name: str = "log"

    def temporary(self, eta, f):
        return self.a * np.log10(1.0 + self.b * np.asarray(eta, float) * np.asarray(f, float))


@dataclass(frozen=True)
class PowerCurveModel(_BuildUpModel):
    """Temporary impact Y*pi**delta."""

    y_coef: float = 0.15
    delta: float = 0.47
    name: str = "power"

    def temporary(self, eta, f):
        return self.y_coef * (np.asarray(eta, float) * np.asarray(f, float)) ** self.delta


@dataclass(frozen=True)
class DoublePowerModel(_BuildUpModel):
    """Temporary impact Y*eta**delta*F**gamma1."""

    y_coef: float = 0.207
    delta: float = 0.52
    gamma1: float = 0.54
    name: str = "double_power"

    def temporary(self, eta, f):
        return self.y_coef * np.asarray(eta, float) ** self.delta * np.asarray(f, float) ** self.gamma1


@dataclass(frozen=True)
class DoubleLogModel(_BuildUpModel):
    """Temporary impact a*log10(1 + b*eta)*log10(1 + c*F)."""

    a: float = 0.035
    b: float = 60.0
    c: float = 61.0
    name: str = "double_log"

    def temporary(self, eta, f):
        eta, f = np.asarray(eta, float), np.asarray(f, float)
        return self.a * np.log10(1.0 + self.b * eta) * np.log10(1.0 + self.c * f)


@dataclass(frozen=True)
class SyntheticMarketDay:
    symbol: str
    day_index: int
    bars: DayBars
    orders: list
    base_sigma: float
    noise_multiplier: float  # s-units noise is noise_scale / multiplier

    @property
    def date(self) -> dt.date:
        return self.bars.date


def _trading_dates(first: dt.date, n: int) -> list[dt.date]:
    start = np.busday_offset(np.datetime64(first, "D"), 0, roll="forward")
    days = np.busday_offset(start, np.arange(n))
    return [d.astype(dt.date) for d in days]


def _clock_for(date: dt.date, cfg: PopulationConfig) -> VolumeClock:
    vol = volume_profile(cfg.profile) * cfg.daily_volume
    minutes = MARKET_OPEN + np.arange(MINUTES_PER_DAY)
    bars = DayBars(
        date, minutes, np.ones(MINUTES_PER_DAY), np.ones(MINUTES_PER_DAY),
        np.ones(MINUTES_PER_DAY), np.ones(MINUTES_PER_DAY), vol,
    )
    return build_volume_clock(bars)


def _draw_day(cfg: PopulationConfig, symbol: str, date: dt.date, day_index: int, n: int, clock, rng):
    q = mood_match_probability(cfg.herding_p_same)
    mood = 1 if rng.random() < 0.5 else -1
    etas = sample_trunc_power(*_law(cfg.eta_law), rng, n)
    fs = sample_trunc_power(*_law(cfg.f_law), rng, n)
    follow = rng.random(n) < q
    u = rng.random(n)
    midnight = dt.datetime.combine(date, dt.time())
    close = MARKET_OPEN + MINUTES_PER_DAY
    out = []
    for eta, f, fol, ui in zip(etas, fs, follow, u):
        v_s = ui * (1.0 - f)
        t_s = int(np.floor(clock.wall_time(v_s) + 0.5))
        t_e = int(np.floor(clock.wall_time(v_s + f) + 0.5))
        t_s = min(t_s, close - 3)
        t_e = min(max(t_e, t_s + 3), close)
        traded = (clock.volume_time(t_e) - clock.volume_time(t_s)) * clock.total_volume
        order = Metaorder(
            symbol,
            mood if fol else -mood,
            float(eta * traded),
            midnight + dt.timedelta(minutes=t_s),
            midnight + dt.timedelta(minutes=t_e),
        )
        desc = compute_descriptors(order, clock)
        out.append(SyntheticOrder(order, desc, day_index, float(clock.volume_time(t_s))))
    return out


def _law(law: PowerLaw):
    return law.exponent, law.lower, law.upper


def _split_counts(cfg: PopulationConfig, rng) -> np.ndarray:
    cells = cfg.days * len(cfg.symbols)
    return rng.multinomial(cfg.n_orders, np.full(cells, 1.0 / cells)) if cfg.n_orders else np.zeros(cells, int)


def _day_streams(cfg: PopulationConfig):
    root = np.random.SeedSequence(cfg.seed)
    alloc, *cells = root.spawn(1 + cfg.days * len(cfg.symbols))
    return np.random.default_rng(alloc), cells


def generate_population(cfg: PopulationConfig) -> list[SyntheticOrder]:
    """Orders with ground-truth descriptors.

    Each symbol-day has its own random stream, so days can be regenerated
    independently and identical seeds give identical populations.
    """
    alloc, cells = _day_streams(cfg)
    counts = _split_counts(cfg, alloc)
    dates = _trading_dates(cfg.first_day, cfg.days)
    clocks = {}
    out: list[SyntheticOrder] = []
    for i, (n, seq) in enumerate(zip(counts, cells)):
        if n == 0:
            continue
        day_index, sym_index = divmod(i, len(cfg.symbols))
        date = dates[day_index]
        clock = clocks.setdefault(date, _clock_for(date, cfg))
        out.extend(_draw_day(cfg, cfg.symbols[sym_index], date, day_index, int(n), clock, np.random.default_rng(seq)))
    return out


def _aggregate_participation(orders: Sequence[SyntheticOrder], clock) -> float:
    if not orders:
        return 0.0
    load = np.zeros(len(clock.knots) - 1)
    start = clock.knots[0]
    for o in orders:
        load[int(o.order.start_minute - start): int(o.order.end_minute - start)] += o.descriptors.eta
    return float(load.max())


def _fixed_point(x_imp: np.ndarray, w: np.ndarray, sigma: float) -> Optional[float]:
    # smallest lam >= 1 whose exp-range of lam*x_imp + w fits within sigma*lam
    lam = 1.0
    for _ in range(500):
        nxt = max(1.0, _exp_range(lam * x_imp + w, sigma))
        if abs(nxt - lam) <= 1e-14 * nxt:
            return nxt
        if nxt > 1e3:
            return None
        lam = nxt
    return None


def _exp_range(x: np.ndarray, sigma: float) -> float:
    return (math.exp(sigma * x.max()) - math.exp(sigma * x.min())) / sigma


def _noise_multiplier(x_imp: np.ndarray, w: np.ndarray, sigma: float) -> Optional[float]:
    # Symmetric in w -> -w, so the rescaled noise w/lam stays mean-zero
    # given the orders.
    a, b = _fixed_point(x_imp, w, sigma), _fixed_point(x_imp, -w, sigma)
    if a is None or b is None:
        return None
    lam = max(a, b)
    if _exp_range(lam * x_imp + w, sigma) > lam * (1 + 1e-12):
        return None
    return lam


def iter_market(
    cfg: PopulationConfig,
    model: ImpactModel,
    noise_scale: float = 1.0,
    base_sigma: float = 0.02,
    start_price: float = 50.0,
    max_attempts: int = 100,
    impact_budget: float = 0.7,
) -> Iterator[SyntheticMarketDay]:
    """Minute-bar market days carrying the population's impact.

    The log-price is ``sigma_D * (sum of signed trajectories + noise / lam)``
    where ``lam >= 1`` is the smallest factor making the day's
    high-low-open proxy equal ``sigma_D = base_sigma * lam``; an upper wick
    on the highest bar absorbs any slack.  Measured in units of the proxy,
    each order therefore carries exactly its model impact.  Days whose
    concurrent participation exceeds 1, or whose summed peak impacts exceed
    ``impact_budget``, are redrawn from the same day stream; both tests are
    blind to order signs.  Noise paths that cannot fit are redrawn alone.
    """
    if noise_scale < 0:
        raise ValueError("noise_scale must be non-negative")
    alloc, cells = _day_streams(cfg)
    counts = _split_counts(cfg, alloc)
    dates = _trading_dates(cfg.first_day, cfg.days)
    vol = volume_profile(cfg.profile) * cfg.daily_volume
    minutes = MARKET_OPEN + np.arange(MINUTES_PER_DAY)
    clocks: dict = {}
    for i, (n, seq) in enumerate(zip(counts, cells)):
        day_index, sym_index = divmod(i, len(cfg.symbols))
        symbol, date = cfg.symbols[sym_index], dates[day_index]
        clock = clocks.setdefault(date, _clock_for(date, cfg))
        rng = np.random.default_rng(seq)
        for _ in range(max_attempts):
            orders = _draw_day(cfg, symbol, date, day_index, int(n), clock, rng) if n else []
            if _aggregate_participation(orders, clock) > 1.0:
                continue
            # The budget ignores signs, so surviving days carry no sign selection.
            budget = sum(float(model.temporary(o.descriptors.eta, o.descriptors.duration_f)) for o in orders)
            if budget <= impact_budget:
                break
        else:
            raise RuntimeError(
                f"could not draw a valid day for {symbol} {date}: {int(n)} orders exceed the participation "
                f"limit or the impact budget {impact_budget}; spread the orders over more days or symbols"
            )
        x_imp = np.zeros(len(clock.knots))
        for o in orders:
            d = o.descriptors
            z = (clock.cumulative - o.v_start) / d.duration_f
            x_imp += o.order.sign * model.trajectory(d.eta, d.duration_f, z)
        for _ in range(max_attempts):
            steps = rng.normal(0.0, 1.0, MINUTES_PER_DAY) * np.sqrt(np.diff(clock.cumulative))
            w = noise_scale * np.concatenate([[0.0], np.cumsum(steps)])
            lam = _noise_multiplier(x_imp, w, base_sigma)
            if lam is not None:
                break
        else:
            raise RuntimeError(f"could not fit the noise into the range for {symbol} {date}")
        x = lam * x_imp + w
        price = start_price * np.exp(base_sigma * x)
        opens, closes = price[:-1], price[1:]
        highs, lows = np.maximum(opens, closes), np.minimum(opens, closes)
        slack = base_sigma * lam * start_price - (highs.max() - lows.min())
        highs[np.argmax(highs)] += max(slack, 0.0)
        bars = DayBars(date, minutes.copy(), opens, highs, lows, closes, vol.copy())
        yield SyntheticMarketDay(symbol, day_index, bars, orders, base_sigma, lam)


def generate_market(cfg: PopulationConfig, model: ImpactModel, **kwargs) -> list[SyntheticMarketDay]:
    """All market days of :func:`iter_market` as a list."""
    return list(iter_market(cfg, model, **kwargs))
