import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from impactlab.book import (
    BookParams,
    BookSaturationError,
    book_profile,
    cumulative_depth,
    impact_log_closed,
    invert_impact,
)
from impactlab.special import DomainError


def mp_depth(p: BookParams, upper: float) -> float:
    f = lambda y: y**p.n * mpmath.e ** (p.b * y)
    return float(mpmath.quad(f, [0, upper]) / (p.y_norm * mpmath.quad(f, [0, 1])))


@pytest.mark.parametrize("p", [BookParams(1.0, 2.0, 0), BookParams(0.3, 6.1, 1), BookParams(2.0, 0.5, 2.7)])
def test_profile_integrates_to_capacity(p):
    total = mpmath.quad(lambda x: float(book_profile(p, float(x))), [0, 1])
    assert float(total) == pytest.approx(1 / p.y_norm, rel=1e-12)
    z = mpmath.quad(lambda y: y**p.n * mpmath.e ** (p.b * y), [0, 1])
    assert book_profile(p, 1.0) * p.y_norm == pytest.approx(float(mpmath.e**p.b / z), rel=1e-12)


def test_profile_vanishes_at_zero_for_n_one():
    assert book_profile(BookParams(1.0, 3.0, 1), 0.0) == 0.0


def test_profile_at_zero_for_n_zero():
    assert book_profile(BookParams(0.5, math.log(2), 0), 0.0) == pytest.approx(math.log(2) / 0.5, rel=1e-14)


@pytest.mark.parametrize("p", [BookParams(1.0, 6.1, 0), BookParams(0.7, 3.0, 1), BookParams(1.3, 9.0, 3.5)])
def test_cumulative_depth_matches_mpmath(p):
    for x in (0.01, 0.3, 0.77, 1.0):
        assert cumulative_depth(p, x) == pytest.approx(mp_depth(p, x), rel=1e-12)


def test_inversion_boundaries():
    p = BookParams(0.8, 4.0, 1)
    assert invert_impact(p, 0.0) == 0.0
    assert invert_impact(p, p.capacity) == 1.0
    with pytest.raises(BookSaturationError) as info:
        invert_impact(p, 1.5 * p.capacity)
    assert info.value.capacity == pytest.approx(1 / 0.8)


@given(st.floats(0.05, 5.0), st.floats(0.1, 50.0), st.floats(0.0, 4.0), st.floats(1e-6, 1.0))
def test_round_trip(y, b, n, frac):
    p = BookParams(y, b, n)
    pi = frac * p.capacity
    impact = invert_impact(p, pi)
    assert cumulative_depth(p, impact) == pytest.approx(pi, rel=1e-9)


def test_inversion_monotone_and_concave():
    p = BookParams(1.0, math.log(466), 0)
    pi = np.linspace(1e-5, 0.9, 400)
    impact = invert_impact(p, pi)
    d = np.diff(impact)
    assert np.all(d > 0)
    assert np.all(np.diff(d) < 1e-12)


def test_n_zero_inversion_closed_form():
    # inverting exp(b x) depth gives log(1 + Y c pi) / b
    p = BookParams(0.4, 5.0, 0)
    pi = np.geomspace(1e-6, 2.0, 50)
    assert_allclose(invert_impact(p, pi), np.log1p(0.4 * p.c * pi) / 5.0, rtol=1e-10)


def test_printed_closed_form_examples():
    assert impact_log_closed(1.7, 3.0, 0.0) == 0.0
    assert impact_log_closed(1.7, math.log(2), 1.0) == pytest.approx(1.7, rel=1e-14)
    c = 465.0
    assert c * 2e-3 == pytest.approx(0.93)
    small = impact_log_closed(1.0, math.log1p(c), 1e-7)
    assert small == pytest.approx(c * 1e-7 / math.log1p(c), rel=1e-4)


def test_closed_forms_agree_only_at_unit_y():
    b = math.log(466)
    pi = np.geomspace(1e-5, 0.9, 30)
    assert_allclose(invert_impact(BookParams(1.0, b, 0), pi), impact_log_closed(1.0, b, pi), rtol=1e-10)
    assert not np.allclose(invert_impact(BookParams(0.5, b, 0), pi), impact_log_closed(0.5, b, pi))


def test_larger_n_gives_larger_small_pi_impact():
    pi = 1e-4
    values = [invert_impact(BookParams(1.0, 4.0, n), pi) for n in (0, 1, 2, 4)]
    assert np.all(np.diff(values) > 0)


def test_parameter_validation():
    with pytest.raises(DomainError):
        BookParams(0.0, 1.0)
    with pytest.raises(DomainError):
        BookParams(1.0, -1.0)
    with pytest.raises(DomainError):
        book_profile(BookParams(1.0, 1.0), 1.5)
