import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berkson.convolution import (
    QUADRATURE,
    admissible_domain,
    convolve,
    curve,
    local_slope,
    max_gap,
    support_window,
)
from berkson.errors import BadParams, QueryOutsideDomain
from berkson.function_class import MarginParams, make_lb_pair, make_power


def test_step_convolution_closed_form(step):
    F = convolve(step)
    assert F(0.05) == pytest.approx(0.625)
    assert F(-0.3) == pytest.approx(0.25)
    assert F(0.0) == pytest.approx(0.5, abs=1e-15)


def test_queries_outside_q_region_are_rejected(step):
    F = convolve(step)
    with pytest.raises(QueryOutsideDomain):
        F(0.95)


def test_zero_sigma_is_rejected():
    m = make_power(MarginParams(k=2, c=0.25), 0.0)
    with pytest.raises(BadParams):
        convolve(m, 0.0)


@settings(max_examples=40, deadline=None)
@given(
    k=st.sampled_from([1, 2, 3, 4, 2.5]),
    c=st.floats(0.05, 0.5),
    sigma=st.floats(0.01, 0.3),
    u=st.floats(0, 1),
    s=st.floats(0, 1),
)
def test_analytic_matches_quadrature(k, c, sigma, u, s):
    lo, hi = admissible_domain(sigma)
    t = lo + u * (hi - lo)
    m = make_power(MarginParams(k=k, c=c, sigma=sigma), t)
    w = np.array([lo + s * (hi - lo)])
    exact = convolve(m)(w)
    quad = convolve(m, method=QUADRATURE, nodes=256)(w)
    assert exact == pytest.approx(quad, abs=1e-11)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_convolution_keeps_threshold(k):
    m = make_power(MarginParams(k=k, c=0.3, sigma=0.15), -0.4)
    assert convolve(m)(-0.4) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("k", [1, 1.5, 2, 3, 4])
@pytest.mark.parametrize("sigma", [0.05, 0.2])
def test_convolved_excess_near_threshold(k, sigma):
    c, t = 0.25, 0.1
    F = convolve(make_power(MarginParams(k=k, c=c, sigma=sigma), t))
    h = np.linspace(0, sigma, 21)[1:]
    exact = c * ((sigma + h) ** k - (sigma - h) ** k) / (2 * k * sigma)
    got = F.excess(t + h)
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-15)
    # linear growth with slope of order c sigma^(k-2)
    assert np.all(got >= 0.5 * c * sigma ** (k - 2) * h)


def test_local_slope_step(step):
    assert local_slope(convolve(step), 0.05) == pytest.approx(0.25 / 0.1)
    with pytest.raises(BadParams):
        local_slope(convolve(step), 0.2)


def test_pair_gap_and_support(step):
    p0, p1 = make_lb_pair(MarginParams(k=1, c=0.25, sigma=0.1), 0.02)
    F0, F1 = convolve(p0), convolve(p1)
    gap, where = max_gap(F0, F1)
    assert gap == pytest.approx(2 * 0.02 * 0.25 / 0.1)
    lo, hi = support_window(F0, F1)
    assert (lo, hi) == pytest.approx((-0.12, 0.12))
    outside = np.concatenate([np.linspace(-0.9, lo, 50), np.linspace(hi, 0.9, 50)])
    assert np.max(np.abs(F1(outside) - F0(outside))) <= 1e-12


@pytest.mark.parametrize("k", [2, 3])
def test_power_pair_support_window(k):
    sigma, a = 0.05, 0.1
    p0, p1 = make_lb_pair(MarginParams(k=k, c=0.25, sigma=sigma), a)
    F0, F1 = convolve(p0), convolve(p1)
    lo, hi = support_window(F0, F1)
    w = np.linspace(hi, 1 - sigma, 200)
    assert np.max(np.abs(F1(w) - F0(w))) <= 1e-12


def test_curve_columns(step):
    rows = curve(step, 0.1, 11)
    assert rows.shape == (11, 3)
    assert rows[0, 0] == pytest.approx(-0.9) and rows[-1, 0] == pytest.approx(0.9)
