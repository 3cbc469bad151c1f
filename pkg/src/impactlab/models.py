"""Almgren-Chriss and power-law propagator price dynamics.

Propagator quantities are in rescaled units: prices are log-prices divided by
the daily volatility proxy, time is volume time, and trading rates are
normalised by the daily volume.  Almgren-Chriss lives in physical time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .special import DomainError, hyp2f1, integrate

__all__ = [
    "AcParams",
    "PropagatorParams",
    "SimulationConfig",
    "SimulatedPath",
    "DivergenceError",
    "ac_optimal_inventory",
    "ac_trading_rate",
    "ac_trajectory",
    "vwap_temporary",
    "vwap_trajectory",
    "alpha_rate",
    "alpha_temporary",
    "alpha_trajectory",
    "alpha_trajectory_quadrature",
    "simulate_metaorder_path",
    "simulate_metaorder_paths",
]


class DivergenceError(DomainError):
    """Temporary impact diverges (1 + alpha*delta - gamma <= 0)."""


@dataclass(frozen=True)
class AcParams:
    a: float
    sigma: float
    lam: float
    eta: float
    horizon_t: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("a must be positive")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if self.lam < 0:
            raise DomainError("risk aversion must be non-negative")
        if not self.horizon_t > 0:
            raise DomainError("horizon must be positive")

    @property
    def k(self) -> float:
        return math.sqrt(self.lam * self.sigma**2 / self.a)

    @property
    def quantity(self) -> float:
        return self.eta * self.horizon_t


@dataclass(frozen=True)
class PropagatorParams:
    delta: float
    gamma: float
    alpha: float = 0.0
    eta: float = 1.0
    duration_f: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise DomainError("delta must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise DomainError("gamma must lie in [0, 1)")
        if not self.alpha > -1:
            raise DomainError("alpha must exceed -1")
        if self.eta < 0 or not self.duration_f > 0:
            raise DomainError("need eta >= 0 and F > 0")
        if not 1 + self.alpha * self.delta - self.gamma > 0:
            raise DivergenceError("temporary impact diverges: need 1 + alpha*delta - gamma > 0")

    @property
    def manipulable(self) -> bool:
        """True when delta + gamma < 1, the regime open to price manipulation."""
        return self.delta + self.gamma < 1

    @property
    def pi(self) -> float:
        return self.eta * self.duration_f

    @property
    def prefactor(self) -> float:
        return self.eta**self.delta * self.duration_f ** (1 - self.gamma)


def _check_time(p: AcParams, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > p.horizon_t * (1 + 1e-12)):
        raise DomainError("t outside [0, T]")
    return t


def ac_optimal_inventory(p: AcParams, t):
    """Shares still to trade at time t under the risk-averse optimal schedule."""
    t = _check_time(p, t)
    T, Q, k = p.horizon_t, p.quantity, p.k
    if k * T < 1e-8:
        return Q * (1.0 - t / T)
    if k * T > 700:
        # sinh ratio overflows; use the exponential form
        return Q * (np.exp(-k * t) - np.exp(-k * (2 * T - t))) / (1 - np.exp(-2 * k * T))
    return Q * np.sinh(k * (T - t)) / np.sinh(k * T)


def ac_trading_rate(p: AcParams, t):
    t = _check_time(p, t)
    T, Q, k = p.horizon_t, p.quantity, p.k
    if k * T < 1e-8:
        return np.full_like(t, p.eta)
    return Q * k * np.cosh(k * (T - t)) / np.sinh(k * T)


def ac_trajectory(p: AcParams, t):
    """Immediate impact a * (Q - x(t)); equals a*eta*T at t = T for every lambda."""
    return p.a * (p.quantity - ac_optimal_inventory(p, t))


def _vwap(p: PropagatorParams):
    if p.alpha != 0:
        raise DomainError("VWAP formulas need alpha = 0")


def vwap_temporary(p: PropagatorParams) -> float:
    _vwap(p)
    return p.prefactor / (1 - p.gamma)


def vwap_trajectory(p: PropagatorParams, z):
    """Impact of a constant-rate execution at rescaled time z = v / F."""
    _vwap(p)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("z must be non-negative")
    g = 1 - p.gamma
    after = z**g - np.clip(z - 1, 0, None) ** g
    return p.prefactor / g * np.where(z <= 1, z**g, after)


def alpha_rate(p: PropagatorParams, s):
    """Trading rate (per unit volume time, in daily-volume units) at time s."""
    s = np.asarray(s, dtype=float)
    F, a = p.duration_f, p.alpha
    if np.any(s < 0) or np.any(s > F):
        raise DomainError("s outside [0, F]")
    return p.pi * (a + 1) * (F - s) ** a / F ** (a + 1)


def alpha_temporary(p: PropagatorParams) -> float:
    return p.prefactor * (1 + p.alpha) ** p.delta / (1 + p.alpha * p.delta - p.gamma)


def _alpha_trajectory_scalar(p: PropagatorParams, z: float) -> float:
    d, g, a = p.delta, p.gamma, p.alpha
    scale = p.prefactor * (1 + a) ** d
    if z <= 0:
        return 0.0
    if z == 1:
        return alpha_temporary(p)
    if z < 1:
        return scale / (1 - g) * z ** (1 - g) * hyp2f1(1.0, -d * a, 2.0 - g, z)
    return scale / (1 + a * d) * z ** (-g) * hyp2f1(1.0, g, 2.0 + d * a, 1.0 / z)


def alpha_trajectory(p: PropagatorParams, z):
    """Impact at rescaled time z for the (alpha)-family schedule.

    Closed form through 2F1; z = 1 returns the temporary impact (the limit
    from either side).
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise DomainError("z must be non-negative")
    out = np.array([_alpha_trajectory_scalar(p, float(x)) for x in z_arr.ravel()])
    return out.reshape(z_arr.shape) if z_arr.ndim else float(out[0])


def alpha_trajectory_quadrature(p: PropagatorParams, z: float, rel_tol: float = 1e-10) -> float:
    """Same quantity as :func:`alpha_trajectory` by direct numerical integration."""
    d, g, a = p.delta, p.gamma, p.alpha
    ad = a * d
    scale = p.prefactor * (1 + a) ** d
    if z <= 0:
        return 0.0
    # integrate in the distance to the singular endpoint so it is never
    # recovered by cancellation
    if z < 1:
        val = integrate(lambda t: (1 - z + t) ** ad * t ** (-g), 0.0, z, rel_tol, lower_exponent=-g)
    else:
        val = integrate(lambda r: r**ad * (z - 1 + r) ** (-g), 0.0, 1.0, rel_tol, lower_exponent=ad)
    return scale * val


@dataclass(frozen=True)
class SimulationConfig:
    noise_scale: float = 1.0
    step: float = 1e-3
    seed: int = 0
    horizon_multiple: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.horizon_multiple >= 1:
            raise ValueError("horizon_multiple must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")


@dataclass(frozen=True)
class SimulatedPath:
    time: np.ndarray
    impact: np.ndarray  # shape (n_steps + 1,) or (n_paths, n_steps + 1)
    deterministic: np.ndarray
    coarse: bool
    duration: float

    @property
    def z(self) -> np.ndarray:
        return self.time / self.duration


def _propagator_drift(p: PropagatorParams, time: np.ndarray, h: float) -> np.ndarray:
    # left-endpoint rate on each step, kernel integrated exactly over the step
    F, g = p.duration_f, p.gamma
    n = len(time) - 1
    left = time[:-1]
    active = left < F * (1 - 1e-12)
    force = np.zeros(n)
    force[active] = alpha_rate(p, left[active]) ** p.delta
    m = np.arange(n + 1) * h
    kernel = np.zeros(n + 1)
    kernel[1:] = (m[1:] ** (1 - g) - m[:-1] ** (1 - g)) / (1 - g)
    out = np.zeros(n + 1)
    out[1:] = np.convolve(force, kernel[1:])[:n]
    last = np.flatnonzero(active)
    if last.size and time[last[-1] + 1] > F:
        # the final active step overhangs F: trade only on [left, F]
        j = last[-1]
        k = np.arange(j + 1, n + 1)
        full_lo = time[k] - time[j + 1]
        true_lo = np.clip(time[k] - F, 0, None)
        out[k] += force[j] * (full_lo ** (1 - g) - true_lo ** (1 - g)) / (1 - g)
    return out


def _ac_drift(p: AcParams, time: np.ndarray, h: float) -> np.ndarray:
    T = p.horizon_t
    left = time[:-1]
    active = left < T - 1e-12 * T
    rate = np.zeros_like(left)
    rate[active] = ac_trading_rate(p, left[active])
    dt = np.minimum(time[1:], T) - left
    return np.concatenate([[0.0], np.cumsum(p.a * rate * np.where(active, dt, 0.0))])


def simulate_metaorder_paths(
    p: Union[PropagatorParams, AcParams], cfg: SimulationConfig, n_paths: int = 1
) -> SimulatedPath:
    """Euler scheme for the impact plus Gaussian noise, ``n_paths`` at once.

    The noise increments have variance ``step * noise_scale**2`` (times
    ``sigma**2`` for Almgren-Chriss).  Fewer than 10 steps per execution
    sets ``coarse`` and emits a warning.
    """
    duration = p.horizon_t if isinstance(p, AcParams) else p.duration_f
    h = cfg.step
    n_steps = int(math.ceil(cfg.horizon_multiple * duration / h - 1e-9))
    time = np.arange(n_steps + 1) * h
    coarse = duration / h < 10
    if coarse:
        warnings.warn(f"only {duration / h:.1f} steps per execution", RuntimeWarning, stacklevel=2)
    if isinstance(p, AcParams):
        drift = _ac_drift(p, time, h)
        vol = p.sigma * cfg.noise_scale
    else:
        drift = _propagator_drift(p, time, h)
        vol = cfg.noise_scale
    rng = np.random.default_rng(cfg.seed)
    noise = rng.normal(0.0, vol * math.sqrt(h), size=(n_paths, n_steps))
    paths = drift + np.concatenate([np.zeros((n_paths, 1)), np.cumsum(noise, axis=1)], axis=1)
    return SimulatedPath(time, paths if n_paths > 1 else paths[0], drift, coarse, duration)


def simulate_metaorder_path(p: Union[PropagatorParams, AcParams], cfg: SimulationConfig) -> SimulatedPath:
    """One noisy impact path; identical seeds give identical paths."""
    return simulate_metaorder_paths(p, cfg, 1)
