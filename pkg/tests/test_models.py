import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from impactlab.models import (
    AcParams,
    DivergenceError,
    PropagatorParams,
    SimulationConfig,
    ac_optimal_inventory,
    ac_trading_rate,
    ac_trajectory,
    alpha_rate,
    alpha_temporary,
    alpha_trajectory,
    alpha_trajectory_quadrature,
    simulate_metaorder_path,
    simulate_metaorder_paths,
    vwap_temporary,
    vwap_trajectory,
)
from impactlab.special import DomainError


def oracle_trajectory(p: PropagatorParams, z: float) -> float:
    """Impact integral evaluated with mpmath, split at the kink."""
    ad, g = p.alpha * p.delta, p.gamma
    f = lambda s: (1 - s) ** ad * (z - s) ** (-g)
    val = mpmath.quad(f, [0, min(z, 1)])
    return float(p.prefactor * (1 + p.alpha) ** p.delta * val)


# Almgren-Chriss


def test_ac_sinh_example():
    p = AcParams(a=1, sigma=1, lam=1, eta=1, horizon_t=10)
    assert ac_optimal_inventory(p, 5.0) == pytest.approx(10 * math.sinh(5) / math.sinh(10), rel=1e-14)
    assert ac_optimal_inventory(p, 5.0) == pytest.approx(0.06738, abs=5e-6)


def test_ac_risk_neutral_is_linear():
    p = AcParams(a=1, sigma=1, lam=0, eta=2, horizon_t=4)
    t = np.linspace(0, 4, 9)
    assert_allclose(ac_optimal_inventory(p, t), 8 * (1 - t / 4), rtol=1e-14, atol=1e-14)
    assert ac_trajectory(p, 2.0) == pytest.approx(4.0)
    assert_allclose(ac_trading_rate(p, t), 2.0)


@pytest.mark.parametrize("lam", [0.0, 0.1, 0.5, 1.0, 1e6])
def test_ac_boundaries_and_profile_independence(lam):
    p = AcParams(a=0.7, sigma=1.3, lam=lam, eta=0.4, horizon_t=3.0)
    assert ac_optimal_inventory(p, 0.0) == pytest.approx(p.quantity, rel=1e-14)
    assert ac_optimal_inventory(p, 3.0) == pytest.approx(0.0, abs=1e-14)
    assert ac_trajectory(p, 3.0) == pytest.approx(0.7 * 0.4 * 3.0, rel=1e-12)
    assert ac_trajectory(p, 0.0) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0, 5), st.floats(0.1, 5), st.floats(0.1, 20))
def test_ac_inventory_is_monotone(lam, sigma, horizon):
    p = AcParams(1.0, sigma, lam, 1.0, horizon)
    x = ac_optimal_inventory(p, np.linspace(0, horizon, 200))
    assert np.all(np.diff(x) <= 1e-12)


def test_ac_rejects_bad_parameters():
    with pytest.raises(DomainError):
        AcParams(1, 1, -0.1, 1, 1)
    with pytest.raises(DomainError):
        ac_optimal_inventory(AcParams(1, 1, 1, 1, 1), 1.5)


# VWAP propagator


def test_vwap_temporary_examples():
    assert vwap_temporary(PropagatorParams(0.5, 0.5, 0, 0.01, 0.25)) == pytest.approx(0.1, rel=1e-14)
    assert vwap_temporary(PropagatorParams(1.0, 0.0, 0, 0.2, 0.3)) == pytest.approx(0.06, rel=1e-14)
    assert vwap_temporary(PropagatorParams(0.5, 0.5, 0, 0.0, 0.3)) == 0.0


def test_vwap_trajectory_examples():
    p = PropagatorParams(0.5, 0.5, 0, 0.01, 0.25)
    assert vwap_trajectory(p, 1.0) == pytest.approx(vwap_temporary(p), rel=1e-15)
    assert vwap_trajectory(p, 2.0) == pytest.approx(0.1 * (math.sqrt(2) - 1), rel=1e-14)
    assert vwap_trajectory(p, 0.5) == pytest.approx(p.prefactor * 2 * math.sqrt(0.5), rel=1e-14)


@given(st.floats(1e-4, 1.0), st.floats(1e-3, 1.0), st.floats(0.05, 0.95))
def test_vwap_factorises_at_criticality(eta, f, delta):
    gamma = 1 - delta
    a = vwap_temporary(PropagatorParams(delta, gamma, 0, eta, f))
    b = vwap_temporary(PropagatorParams(delta, gamma, 0, eta * f, 1.0))
    assert a == pytest.approx(b, rel=1e-12)


def test_vwap_build_up_and_decay_are_monotone():
    p = PropagatorParams(0.6, 0.3, 0, 0.05, 0.4)
    up = vwap_trajectory(p, np.linspace(0, 1, 100))
    down = vwap_trajectory(p, np.linspace(1, 50, 300))
    assert np.all(np.diff(up) > 0)
    assert np.all(np.diff(down) < 0)


# alpha family


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 3.0])
def test_alpha_rate_integrates_to_pi(alpha):
    p = PropagatorParams(0.5, 0.5, alpha, 0.03, 0.4)
    val = float(mpmath.quad(lambda s: float(alpha_rate(p, float(s))), [0, 0.4]))
    assert val == pytest.approx(p.pi, rel=1e-10)


def test_alpha_rate_examples():
    assert_allclose(alpha_rate(PropagatorParams(0.5, 0.5, 0, 0.03, 0.4), [0, 0.2, 0.4]), 0.03)
    assert alpha_rate(PropagatorParams(0.5, 0.5, 1, 0.03, 0.4), 0.4) == 0.0
    with pytest.raises(DomainError):
        PropagatorParams(0.5, 0.5, -1.0)


def test_alpha_temporary_examples():
    p0 = PropagatorParams(0.4, 0.3, 0.0, 0.02, 0.6)
    assert alpha_temporary(p0) == pytest.approx(vwap_temporary(p0), rel=1e-15)
    assert alpha_temporary(PropagatorParams(0.5, 0.5, 1, 0.01, 0.25)) == pytest.approx(math.sqrt(2) * 0.05, rel=1e-14)
    assert alpha_temporary(PropagatorParams(0.5, 0.5, 4, 1, 1)) == pytest.approx(math.sqrt(5) / 2.5, rel=1e-14)


def test_divergence_is_rejected_and_manipulation_flagged():
    with pytest.raises(DivergenceError):
        PropagatorParams(0.5, 0.9, -0.9)
    assert PropagatorParams(0.3, 0.4).manipulable
    assert not PropagatorParams(0.5, 0.5).manipulable


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0, 4.0])
@pytest.mark.parametrize("z", [0.1, 0.5, 0.9, 0.99, 1.01, 1.5, 2.0, 3.0])
def test_alpha_trajectory_matches_mpmath(alpha, z):
    p = PropagatorParams(0.5, 0.5, alpha, 0.02, 0.3)
    assert alpha_trajectory(p, z) == pytest.approx(oracle_trajectory(p, z), rel=1e-9)


@given(
    st.floats(0.05, 1.0), st.floats(0.0, 0.9), st.floats(-0.9, 6.0),
    st.floats(0.02, 4.0).filter(lambda z: abs(z - 1) > 1e-3),
)
def test_alpha_trajectory_agrees_with_quadrature(delta, gamma, alpha, z):
    try:
        p = PropagatorParams(delta, gamma, alpha, 0.1, 0.5)
    except DivergenceError:
        return
    closed = alpha_trajectory(p, z)
    assert closed == pytest.approx(alpha_trajectory_quadrature(p, z), rel=1e-6)


def test_alpha_zero_reduces_to_vwap():
    p = PropagatorParams(0.45, 0.35, 0.0, 0.05, 0.5)
    z = np.array([0.2, 0.7, 1.0, 1.3, 2.5])
    assert_allclose(alpha_trajectory(p, z), vwap_trajectory(p, z), rtol=1e-13)


def test_alpha_trajectory_continuous_at_completion():
    p = PropagatorParams(0.5, 0.5, 2.0, 0.05, 0.5)
    t = alpha_temporary(p)
    assert alpha_trajectory(p, 1 - 1e-9) == pytest.approx(t, rel=1e-4)
    assert alpha_trajectory(p, 1 + 1e-9) == pytest.approx(t, rel=1e-4)


def test_front_loaded_peak_precedes_completion():
    p = PropagatorParams(0.5, 0.5, 4.0, 1.0, 1.0)
    z = np.linspace(0.01, 1.0, 991)
    traj = alpha_trajectory(p, z)
    assert z[np.argmax(traj)] < 0.99
    assert traj.max() > alpha_temporary(p)


@pytest.mark.parametrize("alpha,above", [(2.0, True), (-0.5, False)])
def test_crossing_direction(alpha, above):
    p = PropagatorParams(0.5, 0.5, alpha, 0.1, 0.5)
    just_before = alpha_trajectory(p, 0.98)
    assert (just_before > alpha_temporary(p)) == above


# simulation


def test_noiseless_simulation_matches_closed_form():
    p = PropagatorParams(0.5, 0.5, 0.0, 0.04, 0.5)
    path = simulate_metaorder_path(p, SimulationConfig(noise_scale=0.0, step=1e-3, horizon_multiple=2))
    exact = vwap_trajectory(p, path.z)
    assert np.max(np.abs(path.impact - exact)) < 1e-12


def test_noiseless_front_loaded_converges():
    p = PropagatorParams(0.5, 0.5, 1.0, 0.04, 0.5)
    errs = []
    for h in (1e-2, 1e-3):
        path = simulate_metaorder_path(p, SimulationConfig(noise_scale=0.0, step=h, horizon_multiple=2))
        errs.append(np.max(np.abs(path.impact - alpha_trajectory(p, path.z))))
    assert errs[1] < errs[0]
    assert errs[1] < 5 * math.sqrt(1e-3) * alpha_temporary(p)


def test_monte_carlo_mean_at_completion():
    p = PropagatorParams(0.5, 0.5, 1.0, 0.04, 0.5)
    sim = simulate_metaorder_paths(p, SimulationConfig(noise_scale=1.0, step=5e-3, seed=9), n_paths=10_000)
    end = sim.impact[:, -1]
    se = end.std(ddof=1) / math.sqrt(end.size)
    assert abs(end.mean() - alpha_temporary(p)) < 3 * se + 2e-2 * alpha_temporary(p)


def test_simulation_is_deterministic_per_seed():
    p = PropagatorParams(0.5, 0.5, 0.0, 0.04, 0.5)
    cfg = SimulationConfig(noise_scale=1.0, step=1e-2, seed=42)
    assert_allclose(simulate_metaorder_path(p, cfg).impact, simulate_metaorder_path(p, cfg).impact, rtol=0, atol=0)
    other = simulate_metaorder_path(p, SimulationConfig(noise_scale=1.0, step=1e-2, seed=43))
    assert not np.array_equal(other.impact, simulate_metaorder_path(p, cfg).impact)


def test_coarse_step_warns():
    p = PropagatorParams(0.5, 0.5, 0.0, 0.04, 0.05)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = simulate_metaorder_path(p, SimulationConfig(noise_scale=0.0, step=0.01))
    assert path.coarse
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_ac_simulation_endpoint():
    p = AcParams(a=0.5, sigma=1.0, lam=0.3, eta=2.0, horizon_t=1.0)
    path = simulate_metaorder_path(p, SimulationConfig(noise_scale=0.0, step=1e-4))
    assert path.impact[-1] == pytest.approx(ac_trajectory(p, 1.0), rel=1e-3)
