import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berkson.errors import BadParams, BoundaryViolation
from berkson.function_class import (
    MarginParams,
    check_membership,
    from_dict,
    from_json,
    lb_beta,
    make_lb_pair,
    make_power,
    make_tabulated,
)


@pytest.mark.parametrize(
    "kw",
    [dict(k=0.5, c=0.2), dict(k=2, c=0.0), dict(k=2, c=0.6), dict(k=2, c=0.3, C=0.2), dict(k=2, c=0.2, sigma=1.0)],
)
def test_params_reject_invalid(kw):
    with pytest.raises(BadParams):
        MarginParams(**kw)


def test_power_values():
    m = make_power(MarginParams(k=3, c=0.25), 0.2)
    assert m(0.6) == pytest.approx(0.54)
    assert m(-0.2) == pytest.approx(0.46)
    assert m(0.2) == 0.5


def test_step_values(step):
    assert step(-0.5) == 0.25
    assert step(0.5) == 0.75
    assert step(0.0) == 0.5


def test_saturation_is_clipped():
    m = make_power(MarginParams(k=2, c=0.5), 0.0)
    x = np.linspace(-1, 1, 201)
    assert np.all((m(x) >= 0) & (m(x) <= 1))
    # the slope-1/2 line hits 0 and 1 exactly at the domain edges
    assert m(1.0) == pytest.approx(1.0)
    k4 = make_power(MarginParams(k=4, c=0.5), 0.0)
    assert k4(0.99) == 1.0 or k4(0.99) == pytest.approx(0.5 + 0.5 * 0.99**3)


def test_threshold_too_close_to_boundary():
    with pytest.raises(BoundaryViolation):
        make_power(MarginParams(k=2, c=0.25, sigma=0.2), 0.9)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_power_members_pass_membership(k):
    m = make_power(MarginParams(k=k, c=0.25, sigma=0.1), 0.3)
    assert check_membership(m, grid_step=1e-3).passed


def test_membership_detects_asymmetry():
    xs = [-1.0, 0.0, 0.05, 1.0]
    ms = [0.2, 0.5, 0.6, 0.9]
    m = make_tabulated(MarginParams(k=2, c=0.1, C=10.0, sigma=0.1), xs, ms)
    report = check_membership(m, grid_step=1e-3)
    assert not report.antisymmetry.passed
    assert report.antisymmetry.worst_x is not None


def test_membership_detects_margin_violation():
    m = make_power(MarginParams(k=2, c=0.25, C=1.0), 0.0)
    strict = MarginParams(k=2, c=0.3, C=1.0)
    wrong = type(m)(strict, m.t, m.form, m.pieces)
    assert not check_membership(wrong, grid_step=1e-3).margin.passed


def test_beta():
    assert lb_beta(0.25, 1.0, 2) == pytest.approx(4 / 3)
    assert lb_beta(0.25, 1.0, 3) == pytest.approx(2.0)
    with pytest.raises(BadParams):
        lb_beta(0.25, 1.0, 1)
    with pytest.raises(BadParams):
        lb_beta(1.0, 1.0, 2)


def test_step_pair_thresholds():
    p0, p1 = make_lb_pair(MarginParams(k=1, c=0.25, sigma=0.1), 0.05)
    assert (p0.t, p1.t) == (-0.05, 0.05)
    assert p0(0.0) == 0.75 and p1(0.0) == 0.25


@pytest.mark.parametrize("k", [2, 3, 4])
def test_power_pair_members_belong_to_class(k):
    params = MarginParams(k=k, c=0.25, C=1.0, sigma=0.05)
    p0, p1 = make_lb_pair(params, 0.1)
    assert p1.t - p0.t == pytest.approx(0.1)
    for m in (p0, p1):
        assert check_membership(m, grid_step=5e-4).passed
    # the pair coincides past the knee
    knee = p0.t + lb_beta(0.25, 1.0, k) * 0.1 + 0.05
    x = np.linspace(knee + 1e-9, 1, 50)
    assert np.array_equal(p0(x), p1(x))


def test_pair_rejects_oversized_separation():
    with pytest.raises(BoundaryViolation):
        make_lb_pair(MarginParams(k=3, c=0.25, sigma=0.1), 1.5)


def test_json_round_trip():
    m = make_power(MarginParams(k=3, c=0.25, sigma=0.1), 0.2)
    back = from_json(m.to_json())
    x = np.linspace(-1, 1, 101)
    assert np.array_equal(back(x), m(x))
    d = json.loads(make_lb_pair(MarginParams(k=2, c=0.25, sigma=0.1), 0.1)[1].to_json())
    p1 = from_dict(d)
    assert p1.t == pytest.approx(-0.9 + 0.1)
    assert len(from_dict({**d, "form": "pair"})) == 2


def test_tabulated_round_trip_and_root():
    m = make_tabulated(MarginParams(k=2, c=0.1, C=2.0), [-1, 0.2, 1], [0.1, 0.5, 0.9])
    assert m.t == pytest.approx(0.2)
    assert from_dict(m.to_dict())(0.6) == pytest.approx(m(0.6))


@settings(max_examples=60, deadline=None)
@given(
    k=st.sampled_from([1, 1.5, 2, 3, 4]),
    c=st.floats(0.05, 0.5),
    t=st.floats(-0.7, 0.7),
    x=st.lists(st.floats(-1, 1), min_size=2, max_size=20),
)
def test_power_is_monotone_and_bounded(k, c, t, x):
    m = make_power(MarginParams(k=k, c=c, sigma=0.1), t)
    xs = np.sort(np.asarray(x))
    v = m(xs)
    assert np.all(np.diff(v) >= -1e-15)
    assert np.all((v >= 0) & (v <= 1))
