"""Acceptance checks shared by the test suite and the ``selftest`` command.

Each ``criterion_*`` function returns a :class:`CriterionResult` whose
``details`` hold only deterministic numbers, so that two runs with the same
seed serialise identically.  Wall-clock times live in ``seconds`` and are
kept out of the serialised details.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harness as hz
from .convolution import QUADRATURE, admissible_domain, convolve
from .estimators import WidehistConfig, actpass, containment_frequency, misclassified_bins, widehist
from .function_class import MarginParams, check_membership, make_lb_pair, make_power
from .lowerbound import (
    ACTIVE,
    PASSIVE,
    SIGMA_LARGE,
    SIGMA_SMALL,
    max_separation,
    rate_from_kl,
    verify_gap_scaling,
)
from .oracle import NoisyOracle, make_rng


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.seconds <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.1f}s" + ("" if self.budget is None else f"/{self.budget:.0f}s")
        return f"[{status}] criterion {self.number:>2}: {self.title} -- {self.summary} ({timing})"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "summary": self.summary,
            "details": self.details,
        }


def _timed(number: int, title: str, budget: float | None):
    def wrap(fn):
        def run(*args, **kwargs) -> CriterionResult:
            t0 = time.perf_counter()
            passed, summary, details = fn(*args, **kwargs)
            dt = time.perf_counter() - t0
            res = CriterionResult(number, title, bool(passed), summary, details, dt, budget)
            res.passed = res.passed and res.within_budget
            return res

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# -- 1 ----------------------------------------------------------------------


def _random_member(rng: np.random.Generator):
    sigma = float(rng.uniform(0.01, 0.3))
    k = int(rng.integers(1, 5))
    c = float(rng.uniform(0.05, 0.45))
    params = MarginParams(k=k, c=c, C=1.0, sigma=sigma)
    if rng.random() < 0.5:
        lo, hi = admissible_domain(sigma)
        return make_power(params, float(rng.uniform(lo, hi))), sigma
    a = float(rng.uniform(0.0, 0.9)) * min(max_separation(k, sigma, c, 1.0), 0.5)
    pair = make_lb_pair(params, a)
    return pair[int(rng.integers(0, 2))], sigma


@_timed(1, "convolution exactness", 10.0)
def criterion_1(seed: int = 0, cases: int = 200):
    """Closed-form convolution against 2048-node quadrature, and ``F(t) = 1/2``."""
    rng = make_rng(seed, 101)
    worst, worst_center, members = 0.0, 0.0, 0
    for _ in range(cases):
        m, sigma = _random_member(rng)
        lo, hi = admissible_domain(sigma)
        w = rng.uniform(lo, hi, size=4)
        exact = convolve(m, sigma)
        quad = convolve(m, sigma, method=QUADRATURE, nodes=2048)
        worst = max(worst, float(np.max(np.abs(exact(w) - quad(w)))))
        if check_membership(m, grid_step=1e-3).antisymmetry.passed:
            members += 1
            worst_center = max(worst_center, abs(float(exact(m.t)) - 0.5))
    ok = worst <= 1e-9 and worst_center <= 1e-10 and members > 0
    return ok, f"max |analytic - quadrature| = {worst:.2e}, max |F(t) - 1/2| = {worst_center:.2e}", {
        "cases": cases,
        "members_checked": members,
        "max_abs_diff": worst,
        "max_center_offset": worst_center,
    }


# -- 2 ----------------------------------------------------------------------


def step_closed_form(w, t: float, c: float, sigma: float) -> np.ndarray:
    """Convolved step ``1/2 -/+ c``: flat, linear over ``[t - sigma, t + sigma]``, flat."""
    w = np.asarray(w, dtype=float)
    return np.where(w <= t - sigma, 0.5 - c, np.where(w >= t + sigma, 0.5 + c, 0.5 + c / sigma * (w - t)))


def step_gap_closed_form(w, a: float, c: float, sigma: float) -> np.ndarray:
    """``|F1 - F0|`` for steps at ``-a`` and ``+a``, both regimes."""
    w = np.asarray(w, dtype=float)
    rise = (w + a + sigma) * c / sigma
    fall = ((a + sigma) - w) * c / sigma
    plateau = 2 * a * c / sigma if sigma >= a else 2 * c
    out = np.minimum(np.minimum(rise, fall), plateau)
    return np.where((w <= -a - sigma) | (w >= a + sigma), 0.0, np.maximum(out, 0.0))


@_timed(2, "convolved step and gap displays", 5.0)
def criterion_2():
    """Convolved step function and both gap displays against their closed forms."""
    c, sigma, t = 0.25, 0.1, 0.0
    m = make_power(MarginParams(k=1, c=c, sigma=sigma), t)
    lo, hi = admissible_domain(sigma)
    w = np.linspace(lo, hi, 10_000)
    curve_err = float(np.max(np.abs(convolve(m, sigma)(w) - step_closed_form(w, t, c, sigma))))
    gap_err = {}
    for label, a, s in (("sigma_above_a", 0.02, 0.1), ("sigma_below_a", 0.2, 0.05)):
        p0, p1 = make_lb_pair(MarginParams(k=1, c=c, sigma=s), a)
        lo, hi = admissible_domain(s)
        w = np.linspace(lo, hi, 10_000)
        got = np.abs(convolve(p1, s)(w) - convolve(p0, s)(w))
        gap_err[label] = float(np.max(np.abs(got - step_gap_closed_form(w, a, c, s))))
    ok = curve_err <= 1e-12 and all(v <= 1e-10 for v in gap_err.values())
    worst_gap = max(gap_err.values())
    return ok, f"curve error {curve_err:.1e}, gap error {worst_gap:.1e}", {"curve_error": curve_err, **gap_err}


# -- 3 ----------------------------------------------------------------------

GAP_GRID = tuple(float(x) for x in np.logspace(-4, -0.6, 7))


@_timed(3, "max-gap scaling", 30.0)
def criterion_3(c: float = 0.25, C: float = 1.0):
    """Max-gap order in both noise regimes for k = 2, 3, 4, exact ``2c`` for k = 1."""
    details, ok = {}, True
    for k in (2, 3, 4):
        rep = verify_gap_scaling(k, c, C, GAP_GRID, GAP_GRID)
        both = all(rep.ratio_range(g) is not None for g in (SIGMA_SMALL, SIGMA_LARGE))
        ok &= rep.passed and both
        details[f"k{k}"] = {g: rep.ratio_range(g) for g in (SIGMA_SMALL, SIGMA_LARGE)}
    rep1 = verify_gap_scaling(1, c, C, GAP_GRID, GAP_GRID)
    err = rep1.exact_large_ratio_error()
    ok &= err is not None and err <= 1e-10
    details["k1_exact_2c_error"] = err
    lo = min(r[0] for d in details.values() if isinstance(d, dict) for r in d.values())
    hi = max(r[1] for d in details.values() if isinstance(d, dict) for r in d.values())
    return ok, f"ratios in [{lo:.3g}, {hi:.3g}], k=1 |ratio - 2c| = {err:.1e}", details


# -- 4 ----------------------------------------------------------------------


def small_noise_gamma(mode: str, k: float) -> float:
    """Power-law exponent placing ``sigma_n = n^-gamma`` well inside the small-noise side.

    Twice the boundary exponent, except ``k = 1``: passive uses 2 (boundary
    1) and active uses 1, since any polynomial sigma stays above ``e^-n``.
    """
    if k == 1:
        return 2.0 if mode == PASSIVE else 1.0
    return 2.0 / (2 * k - 1) if mode == PASSIVE else 2.0 / (2 * k - 2)


def regime_clean_grid(k, mode, law, c=0.25, C=1.0, start=100, decades=4, separation=10.0, cap=1e12):
    """Grid ``n0 * 10^j`` whose smallest ``n`` already sits deep in one regime.

    ``n0`` is the first power of ten from ``start`` at which the lower-bound
    separation ``a*`` and ``sigma_n`` differ by ``separation`` in the
    direction of the predicted regime.
    """
    _, regime = hz.theoretical_exponent(mode, k, law)
    n0 = start
    while n0 <= cap:
        s = law.at(n0)
        a = rate_from_kl(k, s, n0, mode, c, C)
        clean = a * separation <= s if regime == hz.LARGE_NOISE else s * separation <= a
        if clean:
            return [int(n0 * 10**j) for j in range(decades)]
        n0 *= 10
    raise ValueError(f"no regime-clean grid below n = {cap:g}")


@_timed(4, "lower-bound exponents", 60.0)
def criterion_4(c: float = 0.25, C: float = 1.0):
    """Slope of ``a*(n)`` against the predicted exponent in all twelve cells."""
    details, ok, worst = {}, True, 0.0
    for k in (1, 2, 3):
        for mode in (ACTIVE, PASSIVE):
            for label, law in (("constant", hz.Constant(0.1)), ("power_law", hz.PowerLaw(small_noise_gamma(mode, k)))):
                ns = regime_clean_grid(k, mode, law, c, C)
                a = [rate_from_kl(k, law.at(n), n, mode, c, C) for n in ns]
                slope = float(np.polyfit(np.log(ns), np.log(a), 1)[0])
                theo, regime = hz.theoretical_exponent(mode, k, law)
                worst = max(worst, abs(slope - theo))
                ok &= abs(slope - theo) <= 0.1
                details[f"k{k}_{mode}_{label}"] = {
                    "n_grid": ns,
                    "slope": slope,
                    "theoretical": theo,
                    "regime": regime,
                }
    return ok, f"12 cells, worst |slope - theory| = {worst:.3f}", details


# -- 5-7 -------------------------------------------------------------------

PASSIVE_GRID = (1_000, 3_000, 10_000, 30_000)
ACTIVE_GRID = (3_000, 10_000, 30_000)
K2_C = 0.5


def _sweep_summary(res: hz.SweepResult) -> dict:
    return {
        "slope": res.fit.slope,
        "theoretical": res.fit.theoretical_exponent,
        "mean_errors": [cell.mean_error for cell in res.cells],
        "stderr": [cell.stderr for cell in res.cells],
    }


@_timed(5, "WIDEHIST risk scale", 600.0)
def criterion_5(seed: int = 0, trials: int = 500):
    """Passive slopes for k = 1 and k = 2 and the k = 1 error scale at n = 10^4."""
    base = dict(mode=hz.PASSIVE, n_grid=PASSIVE_GRID, trials=trials, seed=seed, t=0.0)
    k1 = hz.run_sweep(hz.ExperimentConfig(k=1, c=0.25, sigma_law=hz.Constant(0.1), **base))
    k2 = hz.run_sweep(hz.ExperimentConfig(k=2, c=K2_C, sigma_law=hz.Constant(0.1), **base))
    k2s = hz.run_sweep(hz.ExperimentConfig(k=2, c=K2_C, sigma_law=hz.PowerLaw(1.0), **base))
    at_1e4 = k1.cells[PASSIVE_GRID.index(10_000)].mean_error
    ratio = at_1e4 / math.sqrt(0.1 / 10_000)
    fits = {"k1": k1, "k2": k2, "k2_small_noise": k2s}
    ok = all(r.fit.passed for r in fits.values()) and 0.25 <= ratio <= 4.0
    details = {name: _sweep_summary(r) for name, r in fits.items()}
    details["k1_ratio_to_sqrt_sigma_over_n"] = ratio
    slopes = ", ".join(f"{name} {r.fit.slope:.3f}" for name, r in fits.items())
    return ok, f"slopes {slopes}; k1 error / sqrt(sigma/n) = {ratio:.2f}", details


@_timed(6, "ACTPASS risk scale", 900.0)
def criterion_6(seed: int = 0, trials: int = 500):
    """Active slopes per sigma and the sigma-exponent of the prefactor."""
    sigmas = (0.05, 0.1, 0.2)
    base = dict(mode=hz.ACTIVE, n_grid=ACTIVE_GRID, trials=trials, seed=seed, t=0.2, sigma_law=hz.Constant(0.1))
    scan1 = hz.prefactor_scan(hz.ExperimentConfig(k=1, c=0.25, **base), sigmas)
    scan2 = hz.prefactor_scan(hz.ExperimentConfig(k=2, c=K2_C, **base), sigmas)
    k1_slopes = {row.sigma: row.sweep.fit for row in scan1.rows}
    k2_fit = next(row.sweep.fit for row in scan2.rows if row.sigma == 0.1)
    ok = all(f.passed for f in k1_slopes.values()) and scan1.passed and k2_fit.passed and scan2.passed
    details = {
        "k1_slopes": {str(s): f.slope for s, f in k1_slopes.items()},
        "k1_sigma_exponent_raw": scan1.sigma_exponent,
        "k1_sigma_exponent_epoch_adjusted": scan1.adjusted_sigma_exponent,
        "k2_slope_sigma_0.1": k2_fit.slope,
        "k2_other_slopes": {str(r.sigma): r.sweep.fit.slope for r in scan2.rows},
        "k2_sigma_exponent_raw": scan2.sigma_exponent,
        "k2_sigma_exponent_epoch_adjusted": scan2.adjusted_sigma_exponent,
    }
    summary = (
        f"k1 slopes {', '.join(f'{f.slope:.3f}' for f in k1_slopes.values())}; "
        f"k1 sigma-exp {scan1.adjusted_sigma_exponent:.2f} (raw {scan1.sigma_exponent:.2f}); "
        f"k2 slope {k2_fit.slope:.3f}, sigma-exp {scan2.adjusted_sigma_exponent:.2f} (raw {scan2.sigma_exponent:.2f})"
    )
    return ok, summary, details


@_timed(7, "active beats passive", None)
def criterion_7(seed: int = 0, trials: int = 500):
    """Active mean error at most passive plus two combined standard errors."""
    details, ok = {}, True
    for k, c in ((1, 0.25), (2, K2_C)):
        cells = {}
        for mode in (hz.ACTIVE, hz.PASSIVE):
            cfg = hz.ExperimentConfig(mode, k, c, hz.Constant(0.1), ACTIVE_GRID, trials=trials, seed=seed, t=0.2)
            cells[mode] = hz.run_cell(cfg, 10_000)
        (ma, sa), (mp, sp) = cells[hz.ACTIVE], cells[hz.PASSIVE]
        ok &= ma <= mp + 2 * math.hypot(sa, sp)
        details[f"k{k}"] = {"active": ma, "passive": mp, "ratio": mp / ma}
    summary = ", ".join(f"{name}: passive/active = {d['ratio']:.2f}" for name, d in details.items())
    return ok, summary, details


# -- 8-9 -------------------------------------------------------------------


@_timed(8, "epoch containment", None)
def criterion_8(seed: int = 0, trials: int = 500):
    """Fraction of trials whose epoch domain contains the threshold."""
    sigma, n, t = 0.05, 20_000, 0.2
    m = make_power(MarginParams(k=1, c=0.25, sigma=sigma), t)
    cfg = WidehistConfig(delta=0.01)
    traces = [actpass(NoisyOracle(m, n, seed=seed, stream=i), n, 1, 0.25, cfg) for i in range(trials)]
    freq = containment_frequency(traces, t)
    ok = bool(np.all(freq >= 0.95))
    return ok, "per-epoch " + ", ".join(f"{f:.3f}" for f in freq), {"frequency": freq.tolist()}


@_timed(9, "misclassified-bin frequency", None)
def criterion_9(seed: int = 0, trials: int = 500):
    """Frequency of any bin outside the three around ``t`` landing on the wrong side."""
    sigma, n, t, delta = 0.1, 10_000, 0.0, 0.05
    m = make_power(MarginParams(k=1, c=0.25, sigma=sigma), t)
    cfg = WidehistConfig(delta=delta)
    bad = 0
    for i in range(trials):
        oracle = NoisyOracle(m, n, seed=seed, stream=i)
        trace = widehist(oracle.passive_batch(n), sigma, 1, 0.25, oracle.domain, cfg)
        bad += len(misclassified_bins(trace, t)) > 0
    freq = bad / trials
    return freq <= delta + 0.03, f"frequency {freq:.3f} (limit {delta + 0.03:.2f})", {"frequency": freq}


# -- 10 --------------------------------------------------------------------


@_timed(10, "selftest determinism", None)
def criterion_10(seed: int = 0):
    """Two quick selftests with one seed write byte-identical CSV and JSON files."""
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for name in ("first", "second"):
            out = Path(tmp) / name
            code = main(["selftest", "--quick", "--seed", str(seed), "--out", str(out)])
            files = {
                p.name: p.read_bytes()
                for p in sorted(out.iterdir())
                if p.suffix in (".csv", ".json") and p.name != "manifest.json"
            }
            runs.append((code, files))
    (c1, f1), (c2, f2) = runs
    same = f1 == f2 and bool(f1)
    return same and c1 == c2 == 0, f"{len(f1)} files compared, identical: {same}", {"files": sorted(f1)}


ALL = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def smoke_sweep(seed: int = 0, trials: int = 50) -> dict:
    """Short passive k = 1 sweep used by the quick selftest."""
    cfg = hz.ExperimentConfig(hz.PASSIVE, 1, 0.25, hz.Constant(0.1), PASSIVE_GRID[:3], trials=trials, seed=seed)
    return _sweep_summary(hz.run_sweep(cfg))


def run_all(seed: int = 0, quick: bool = False) -> list[CriterionResult]:
    """Run the acceptance criteria; ``quick`` keeps only the deterministic 1-3."""
    if quick:
        return [criterion_1(seed), criterion_2(), criterion_3()]
    results = [criterion_1(seed), criterion_2(), criterion_3(), criterion_4()]
    results += [fn(seed) for fn in (criterion_5, criterion_6, criterion_7, criterion_8, criterion_9)]
    results.append(criterion_10(seed))
    return results
