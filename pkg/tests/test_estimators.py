import numpy as np
import pytest

from berkson.errors import BadParams, DegenerateDomain, TooFewSamples
from berkson.estimators import (
    NOISELESS,
    PHASE_ONE,
    PHASE_TWO,
    WidehistConfig,
    actpass,
    bin_width,
    containment_frequency,
    majority_bisection,
    misclassified_bins,
    n_epochs,
    votes_per_node,
    widehist,
)
from berkson.function_class import MarginParams, make_power
from berkson.oracle import NoisyOracle, Samples


def test_noiseless_step_is_located_within_one_bin():
    m = make_power(MarginParams(k=1, c=0.5), 0.3)
    o = NoisyOracle(m, 1000, sigma=0.0)
    trace = widehist(o.passive_batch(1000), 0.0, 1, 0.5, o.domain)
    assert trace.regime == NOISELESS
    assert abs(trace.t_hat - 0.3) <= trace.bin_width


def test_all_negative_labels_return_right_edge():
    w = np.linspace(-0.9, 0.9, 100)
    trace = widehist(Samples(w, -np.ones(100)), 0.1, 1, 0.25, (-0.9, 0.9))
    assert trace.crossing_index is None
    assert trace.t_hat == 0.9
    trace = widehist(Samples(w, np.ones(100)), 0.1, 1, 0.25, (-0.9, 0.9))
    assert trace.t_hat == -0.9


def test_input_errors():
    w = np.linspace(-0.5, 0.5, 3)
    with pytest.raises(TooFewSamples):
        widehist(Samples(w, np.ones(3)), 0.1, 1, 0.25, (-0.5, 0.5))
    with pytest.raises(DegenerateDomain):
        widehist(Samples(np.zeros(10), np.ones(10)), 0.1, 1, 0.25, (0.2, 0.2))
    with pytest.raises(BadParams):
        WidehistConfig(delta=1.5)
    with pytest.raises(BadParams):
        WidehistConfig(bin_width_override=-1.0)


def test_bin_width_regimes():
    cfg = WidehistConfig()
    h, regime = bin_width(10_000, 0.1, 1, 0.25, 1.8, cfg)
    assert regime == "noisy" and 0 < h <= 0.025
    h, regime = bin_width(10_000, 1e-6, 2, 0.25, 1.8, cfg)
    assert regime == NOISELESS
    h, _ = bin_width(100, 0.1, 1, 0.25, 1.8, WidehistConfig(bin_width_override=1e-6))
    assert h == pytest.approx(2 * 1.8 / 100)


def test_overrides_are_used():
    m = make_power(MarginParams(k=1, c=0.25, sigma=0.1), 0.0)
    o = NoisyOracle(m, 2000, seed=0)
    cfg = WidehistConfig(bin_width_override=0.05, smoothing_radius_override=0.1)
    trace = widehist(o.passive_batch(2000), 0.1, 1, 0.25, o.domain, cfg)
    assert trace.bin_width == pytest.approx(0.05)
    assert trace.smoothing_radius == 0.1


def test_t_hat_stays_in_domain():
    m = make_power(MarginParams(k=2, c=0.25, sigma=0.1), 0.5)
    for s in range(20):
        o = NoisyOracle(m, 500, seed=s)
        trace = widehist(o.passive_batch(500), 0.1, 2, 0.25, o.domain)
        assert -0.9 <= trace.t_hat <= 0.9


def test_smoothed_means_grow_away_from_threshold():
    c, sigma, n, t = 0.25, 0.1, 10_000, 0.0
    m = make_power(MarginParams(k=1, c=c, sigma=sigma), t)
    traces = []
    for i in range(200):
        o = NoisyOracle(m, n, seed=4, stream=i)
        traces.append(widehist(o.passive_batch(n), sigma, 1, c, o.domain))
    h = traces[0].bin_width
    i_star = int(np.floor((t + 0.9) / h))
    p = np.array([tr.smoothed for tr in traces])
    mean, se = p.mean(axis=0), p.std(axis=0, ddof=1) / np.sqrt(len(traces))
    right = np.arange(i_star + 2, len(mean))
    left = np.arange(0, i_star - 1)
    assert np.all(mean[right] >= 0.5 + c / sigma * h - 3 * se[right])
    assert np.all(mean[left] <= 0.5 - c / sigma * h + 3 * se[left])


def test_misclassified_bins_helper():
    w = np.linspace(-0.9, 0.9, 1000)
    y = np.where(w > 0, 1, -1)
    trace = widehist(Samples(w, y), 0.1, 1, 0.25, (-0.9, 0.9))
    assert len(misclassified_bins(trace, 0.0)) == 0
    trace.smoothed[0] = 0.9
    assert list(misclassified_bins(trace, 0.0)) == [0]


@pytest.mark.parametrize("sigma,expected", [(0.01, 7), (0.5, 1), (0.1, 4), (0.05, 5)])
def test_epoch_count(sigma, expected):
    assert n_epochs(sigma) == expected


def test_actpass_epoch_structure():
    m = make_power(MarginParams(k=1, c=0.25, sigma=0.05), 0.2)
    trace = actpass(NoisyOracle(m, 5000, seed=3), 5000, 1, 0.25)
    assert len(trace.epochs) == 5
    assert sum(ep.budget for ep in trace.epochs) == 5000
    assert trace.epochs[-1].budget == 5000 // 5 + 5000 % 5
    for e, ep in enumerate(trace.epochs, start=1):
        lo, hi = ep.domain
        assert -1 <= lo < hi <= 1
        assert (hi - lo) / 2 <= 2.0 ** (-e + 1) + 1e-12
        if lo > -1 and hi < 1:
            assert (hi - lo) / 2 == pytest.approx(2.0 ** (-e + 1))
    assert trace.t_hat == trace.epochs[-1].t_e


def test_actpass_single_epoch_is_widehist():
    m = make_power(MarginParams(k=1, c=0.25, sigma=0.5), 0.0)
    trace = actpass(NoisyOracle(m, 1000, seed=0), 1000, 1, 0.25)
    assert len(trace.epochs) == 1


def test_actpass_phase_switches_once():
    # the noise is invisible on the wide early domains and visible on the late ones
    m = make_power(MarginParams(k=2, c=0.25, sigma=0.01), 0.1)
    for s in range(3):
        trace = actpass(NoisyOracle(m, 700_000, seed=s), 700_000, 2, 0.25)
        phases = [ep.phase for ep in trace.epochs]
        switches = sum(a != b for a, b in zip(phases, phases[1:]))
        assert switches == 1
        assert phases[0] == PHASE_ONE and phases[-1] == PHASE_TWO


def test_actpass_phase_stays_one_when_noise_is_undetectable():
    m = make_power(MarginParams(k=2, c=0.25, sigma=0.01), 0.1)
    trace = actpass(NoisyOracle(m, 3000, seed=0), 3000, 2, 0.25)
    assert {ep.phase for ep in trace.epochs} == {PHASE_ONE}


def test_actpass_budget_smaller_than_epochs():
    m = make_power(MarginParams(k=1, c=0.25, sigma=0.01), 0.0)
    with pytest.raises(BadParams):
        actpass(NoisyOracle(m, 5, seed=0), 5, 1, 0.25)


def test_containment_first_epoch_is_certain():
    m = make_power(MarginParams(k=1, c=0.25, sigma=0.1), 0.3)
    traces = [actpass(NoisyOracle(m, 2000, seed=0, stream=i), 2000, 1, 0.25) for i in range(20)]
    freq = containment_frequency(traces, 0.3)
    assert freq[0] == 1.0
    assert len(freq) == 4


def test_majority_bisection_noiseless():
    m = make_power(MarginParams(k=1, c=0.5), 0.3)
    trace = majority_bisection(NoisyOracle(m, 100, sigma=0.0), 100, 0.5)
    assert abs(trace.t_hat - 0.3) <= 2.0**-20


def test_votes_per_node():
    assert votes_per_node(1000, 0.5, 0.05) == 1
    r = votes_per_node(1000, 0.25, 0.05)
    assert r % 2 == 1 and r > 1
