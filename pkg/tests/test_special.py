import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from impactlab.special import (
    DomainError,
    QuadratureError,
    QuadratureSpec,
    hyp2f1,
    hyp2f1_series,
    integrate,
)


def mp_2f1(a, b, c, z):
    return float(mpmath.hyp2f1(a, b, c, z))


@pytest.mark.parametrize(
    "a,b,c,z",
    [
        (1.0, 1.0, 2.0, 0.5),
        (1.0, -0.25, 1.5, 0.8),
        (0.5, 0.5, 1.5, 0.99),
        (1.0, 0.5, 3.0, 0.999),
        (2.0, 3.0, 6.5, 1.0),
        (0.3, 0.7, 1.0, 0.9),  # c - a - b = 0, logarithmic case
        (1.0, 1.0, 4.0, 0.95),  # c - a - b = 2
        (1.5, 2.5, 2.0, 0.7),  # c - a - b = -2
        (0.2, 1.3, 2.1, -5.0),
        (1.0, 0.5, 2.5, -0.9),
    ],
)
def test_hyp2f1_matches_mpmath(a, b, c, z):
    assert_allclose(hyp2f1(a, b, c, z), mp_2f1(a, b, c, z), rtol=1e-12)


@given(
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    c=st.floats(0.1, 5),
    z=st.floats(-3, 0.98),
)
def test_hyp2f1_random_against_mpmath(a, b, c, z):
    ref = mp_2f1(a, b, c, z)
    assert hyp2f1(a, b, c, z) == pytest.approx(ref, rel=1e-9, abs=1e-11 * max(1.0, abs(ref)))


def test_b_zero_gives_one():
    for z in (-2.0, 0.0, 0.3, 0.99):
        assert hyp2f1(1.3, 0.0, 2.2, z) == 1.0


def test_log_identity():
    for z in np.linspace(-0.9, 0.95, 40):
        if z == 0:
            continue
        assert_allclose(hyp2f1(1, 1, 2, z), -math.log1p(-z) / z, rtol=1e-13)


def test_series_polynomial_case():
    # (-2, b; c; z) terminates after three terms
    a, b, c, z = -2.0, 1.5, 2.5, 0.7
    expected = 1 + a * b / c * z + a * (a + 1) * b * (b + 1) / (c * (c + 1) * 2) * z**2
    assert_allclose(hyp2f1_series(a, b, c, z), expected, rtol=1e-15)


def test_domain_errors():
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, -2.0, 0.3)
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 2.0, 1.5)
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 1.5, 1.0)  # c - a - b <= 0 diverges at z = 1
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 2.0, float("nan"))


def test_gauss_sum_at_one():
    a, b, c = 0.3, 0.4, 1.9
    expected = math.gamma(c) * math.gamma(c - a - b) / (math.gamma(c - a) * math.gamma(c - b))
    assert_allclose(hyp2f1(a, b, c, 1.0), expected, rtol=1e-14)


def test_integrate_polynomial():
    assert_allclose(integrate(lambda x: x, 0.0, 1.0), 0.5, rtol=1e-14)


def test_integrate_endpoint_singularity():
    val = integrate(lambda s: (1 - s) ** -0.5, 0.0, 1.0, 1e-12, upper_exponent=-0.5)
    assert_allclose(val, 2.0, rtol=1e-12)
    val = integrate(lambda s: s**-0.7, 0.0, 1.0, 1e-12, lower_exponent=-0.7)
    assert_allclose(val, 1 / 0.3, rtol=1e-12)


def test_integrate_smooth_against_closed_form():
    # int_0^1 (2 - s)^(-1/2) ds = 2 (sqrt 2 - 1)
    assert_allclose(integrate(lambda s: (2 - s) ** -0.5, 0.0, 1.0, 1e-13), 2 * (math.sqrt(2) - 1), rtol=1e-13)


def test_quadrature_spec_validates_and_integrates():
    with pytest.raises(ValueError):
        QuadratureSpec(math.sin, 1.0, 0.0)
    assert_allclose(QuadratureSpec(math.sin, 0.0, math.pi, 1e-12).integrate(), 2.0, rtol=1e-12)


def test_quadrature_error_reports_estimate():
    with pytest.raises(QuadratureError) as info:
        # strongly singular and unannounced: cannot meet the tolerance in 5 intervals
        integrate(lambda s: s**-0.9, 0.0, 1.0, 1e-14, limit=5)
    assert math.isfinite(info.value.estimate)
