import math
import warnings

import numpy as np
import pytest

from berkson import harness as hz
from berkson.errors import BadParams, DegenerateFit, RegimeViolation


@pytest.mark.parametrize(
    "mode,k,law,exp,regime",
    [
        (hz.PASSIVE, 2, hz.Constant(0.1), -0.5, hz.LARGE_NOISE),
        (hz.PASSIVE, 2, hz.PowerLaw(1.0), -1 / 3, hz.SMALL_NOISE),
        (hz.ACTIVE, 2, hz.Constant(0.1), -0.5, hz.LARGE_NOISE),
        (hz.ACTIVE, 3, hz.Constant(0.1), -0.5, hz.LARGE_NOISE),
        (hz.ACTIVE, 3, hz.PowerLaw(0.1), 0.1 - 0.5, hz.LARGE_NOISE),
        (hz.ACTIVE, 1, hz.PowerLaw(1.0), -1.5, hz.LARGE_NOISE),
        (hz.PASSIVE, 1, hz.PowerLaw(0.5), -0.75, hz.LARGE_NOISE),
        (hz.PASSIVE, 2, hz.PowerLaw(1 / 3), -1 / 3, hz.LARGE_NOISE),
    ],
)
def test_theoretical_exponents(mode, k, law, exp, regime):
    got, reg = hz.theoretical_exponent(mode, k, law)
    assert got == pytest.approx(exp)
    assert reg == regime


def test_exponential_regime():
    assert hz.theoretical_exponent(hz.ACTIVE, 1, hz.Constant(0.0)) == (-math.inf, hz.EXPONENTIAL)
    with pytest.raises(BadParams):
        hz.theoretical_exponent("sideways", 1, hz.Constant(0.1))


def test_fit_exact_power_laws():
    n = np.array([100, 1000, 10_000])
    fit = hz.fit_rate(zip(n, n ** (-1 / 3)), theoretical=-1 / 3)
    assert fit.slope == pytest.approx(-1 / 3) and fit.r_squared == pytest.approx(1.0) and fit.passed
    fit = hz.fit_rate(zip(n, 5 * n**-0.5))
    assert fit.intercept == pytest.approx(math.log(5))
    assert not fit.passed


def test_fit_floors_zero_errors():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = hz.fit_rate([(10, 1e-3), (100, 0.0), (1000, 1e-5)])
    assert any("floored" in str(w.message) for w in caught)
    assert math.isfinite(fit.slope)


@pytest.mark.parametrize("pts", [[(10, 1.0), (100, 0.1)], [(10, 1.0), (10, 0.5), (10, 0.1)], [(10, float("nan"))] * 3])
def test_fit_degenerate(pts):
    with pytest.raises(DegenerateFit):
        hz.fit_rate(pts)


def test_config_validation():
    with pytest.raises(BadParams):
        hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (100, 100, 200))
    with pytest.raises(BadParams):
        hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (100, 200, 300), trials=10)


def test_noiseless_active_bisection_cell():
    cfg = hz.ExperimentConfig(hz.ACTIVE, 1, 0.5, hz.Constant(0.0), (100, 200, 300), trials=50, t=0.3)
    mean, se = hz.run_cell(cfg, 100)
    assert mean <= 2.0**-20


def test_run_cell_is_deterministic():
    cfg = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 2000, 3000), trials=50, seed=5)
    assert hz.run_cell(cfg, 1000) == hz.run_cell(cfg, 1000)


def test_threads_do_not_change_results(monkeypatch):
    cfg = hz.ExperimentConfig(hz.ACTIVE, 1, 0.25, hz.Constant(0.1), (1000, 2000, 3000), trials=50, seed=2, t=0.2)
    serial = hz.trial_errors(cfg, 2000)
    monkeypatch.setenv("BERKSON_THREADS", "3")
    assert np.array_equal(hz.trial_errors(cfg, 2000), serial)


def test_passive_error_scale_at_ten_thousand():
    cfg = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 3000, 10_000), trials=100)
    mean, _ = hz.run_cell(cfg, 10_000)
    assert 0.25 <= mean / math.sqrt(0.1 / 10_000) <= 4


def test_randomized_threshold_varies_by_trial():
    cfg = hz.ExperimentConfig(
        hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 2000, 3000), trials=50, t=hz.Randomized(-0.5, 0.5)
    )
    errs = hz.trial_errors(cfg, 1000)
    assert len(np.unique(errs)) > 40


def test_prefactor_scan_rejects_small_noise_cells():
    base = hz.ExperimentConfig(hz.ACTIVE, 2, 0.25, hz.Constant(0.1), (1000, 3000, 10_000), trials=50)
    with pytest.raises(RegimeViolation):
        hz.prefactor_scan(base, [0.001, 0.005, 0.01])


def test_prefactor_scan_passive_k1():
    base = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 3000, 10_000), trials=200)
    scan = hz.prefactor_scan(base, [0.05, 0.1, 0.2])
    assert scan.expected == 0.5
    assert abs(scan.sigma_exponent - 0.5) <= 0.2
    assert scan.sigma_exponent == scan.adjusted_sigma_exponent


def test_sweep_outputs():
    cfg = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 2000, 4000), trials=50)
    res = hz.run_sweep(cfg)
    lines = hz.sweep_csv([res]).splitlines()
    assert lines[0] == "mode,k,c,sigma,n,trials,mean_error,stderr"
    assert len(lines) == 4
    assert '"theoretical_exponent": -0.5' in hz.sweep_json([res])
    errs = [c.mean_error for c in res.cells]
    ses = [c.stderr for c in res.cells]
    # monotone in n up to noise
    assert all(b <= a + 2 * math.hypot(sa, sb) for a, b, sa, sb in zip(errs, errs[1:], ses, ses[1:]))


def test_worst_case_covers_adversarial_set():
    cfg = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), (1000, 2000, 3000), trials=50)
    mean, se, t = hz.run_worst_case(cfg, 1000)
    assert mean >= hz.run_cell(cfg, 1000)[0]
    assert t in (*hz.adversarial_thresholds(0.1), "randomized")
