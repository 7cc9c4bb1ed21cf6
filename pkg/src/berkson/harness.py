"""Monte-Carlo experiment driver.

A sweep runs ``trials`` independent estimates per sample size ``n``, records
the mean point error ``|t_hat - t|`` with its standard error, and fits a
straight line to ``log(error)`` against ``log(n)``.  The fitted slope is then
compared with the exponent predicted by the minimax rate table.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import linregress

from .errors import BadParams, DegenerateFit, RegimeViolation
from .estimators import WidehistConfig, actpass, majority_bisection, n_epochs, widehist
from .function_class import MarginParams, make_power
from .oracle import NoisyOracle, make_rng

PASSIVE = "passive"
ACTIVE = "active"
MODES = (PASSIVE, ACTIVE)

SMALL_NOISE = "SmallNoise"
LARGE_NOISE = "LargeNoise"
EXPONENTIAL = "Exponential"

ERROR_FLOOR = 1e-12
DEFAULT_TOLERANCE = 0.15
CSV_COLUMNS = ("mode", "k", "c", "sigma", "n", "trials", "mean_error", "stderr")


@dataclass(frozen=True)
class Constant:
    """Noise width that does not change with ``n``."""

    sigma: float

    def at(self, n: int) -> float:
        return self.sigma

    def to_dict(self) -> dict:
        return {"constant": self.sigma}


@dataclass(frozen=True)
class PowerLaw:
    """Noise width ``sigma_n = n^(-gamma)``."""

    gamma: float

    def at(self, n: int) -> float:
        return float(n) ** (-self.gamma)

    def to_dict(self) -> dict:
        return {"power_law": self.gamma}


@dataclass(frozen=True)
class Randomized:
    """Threshold drawn uniformly from ``[lo, hi]`` afresh in every trial."""

    lo: float
    hi: float

    def to_dict(self) -> dict:
        return {"randomized": [self.lo, self.hi]}


def sigma_law_from_dict(d) -> Constant | PowerLaw:
    if isinstance(d, (int, float)):
        return Constant(float(d))
    if "constant" in d:
        return Constant(float(d["constant"]))
    if "power_law" in d:
        return PowerLaw(float(d["power_law"]))
    raise BadParams(f"sigma_law must have a 'constant' or 'power_law' key, got {d!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    k: float
    c: float
    sigma_law: Constant | PowerLaw
    n_grid: tuple[int, ...]
    C: float = 1.0
    trials: int = 500
    seed: int = 0
    estimator: WidehistConfig = field(default_factory=WidehistConfig)
    t: float | Randomized = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise BadParams(f"mode must be one of {MODES}, got {self.mode!r}")
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise BadParams("n_grid must be strictly increasing with at least 3 values")
        if self.trials < 50:
            raise BadParams(f"trials must be >= 50, got {self.trials}")
        MarginParams(k=self.k, c=self.c, C=self.C)

    def to_dict(self) -> dict:
        t = self.t.to_dict() if isinstance(self.t, Randomized) else self.t
        return {
            "mode": self.mode,
            "k": self.k,
            "c": self.c,
            "C": self.C,
            "sigma_law": self.sigma_law.to_dict(),
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "seed": self.seed,
            "t": t,
        }


# -- theory -----------------------------------------------------------------


def theoretical_exponent(mode: str, k: float, sigma_law: Constant | PowerLaw) -> tuple[float, str]:
    """n-exponent of the predicted error and the regime it comes from.

    Passive: ``n^(-1/(2k-1))`` when ``sigma_n`` is below that scale,
    otherwise ``sigma_n^(-(k-3/2)) n^(-1/2)``.  Active: ``n^(-1/(2k-2))``
    (exponentially small for ``k = 1``) when ``sigma_n`` is below that scale,
    otherwise ``sigma_n^(-(k-2)) n^(-1/2)``.  A power law exactly at the
    boundary counts as large noise.  Exponentially small rates are reported
    as ``-inf`` with regime ``"Exponential"``.
    """
    if mode not in MODES:
        raise BadParams(f"unknown mode {mode!r}")
    if not k >= 1:
        raise BadParams(f"k must be >= 1, got {k}")
    if isinstance(sigma_law, Constant):
        if sigma_law.sigma < 0:
            raise BadParams("sigma must be non-negative")
        if sigma_law.sigma > 0:
            return -0.5, LARGE_NOISE
        if mode == PASSIVE:
            return -1.0 / (2 * k - 1), SMALL_NOISE
        if k == 1:
            return -math.inf, EXPONENTIAL
        return -1.0 / (2 * k - 2), SMALL_NOISE
    if not isinstance(sigma_law, PowerLaw):
        raise BadParams(f"unknown sigma law {sigma_law!r}")
    g = sigma_law.gamma
    if mode == PASSIVE:
        if g > 1.0 / (2 * k - 1):
            return -1.0 / (2 * k - 1), SMALL_NOISE
        return g * (k - 1.5) - 0.5, LARGE_NOISE
    # A polynomially shrinking sigma always dominates e^-n, so k = 1 stays large.
    if k > 1 and g > 1.0 / (2 * k - 2):
        return -1.0 / (2 * k - 2), SMALL_NOISE
    return g * (k - 2) - 0.5, LARGE_NOISE


def sigma_exponent(mode: str, k: float) -> float:
    """Exponent of sigma in the large-noise prefactor."""
    return -(k - 1.5) if mode == PASSIVE else -(k - 2.0)


def cell_regime(mode: str, k: float, sigma: float, n: int) -> str:
    """Regime of a single ``(sigma, n)`` cell."""
    if mode == PASSIVE:
        return SMALL_NOISE if sigma < n ** (-1.0 / (2 * k - 1)) else LARGE_NOISE
    if k == 1:
        return EXPONENTIAL if sigma < math.exp(-n) else LARGE_NOISE
    return SMALL_NOISE if sigma < n ** (-1.0 / (2 * k - 2)) else LARGE_NOISE


# -- Monte Carlo ------------------------------------------------------------


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BERKSON_THREADS", "1")))
    except ValueError:
        return 1


def _trial(config: ExperimentConfig, n: int, sigma: float, i: int) -> float:
    if isinstance(config.t, Randomized):
        t = float(make_rng(config.seed, i, 1).uniform(config.t.lo, config.t.hi))
    else:
        t = float(config.t)
    m = make_power(MarginParams(k=config.k, c=config.c, C=config.C, sigma=sigma), t)
    oracle = NoisyOracle(m, n, seed=config.seed, stream=i)
    if config.mode == PASSIVE:
        trace = widehist(oracle.passive_batch(n), sigma, config.k, config.c, oracle.domain, config.estimator)
    elif sigma == 0 or cell_regime(ACTIVE, config.k, sigma, n) == EXPONENTIAL:
        if config.k != 1:
            raise BadParams("noiseless active fallback is only defined for k = 1")
        trace = majority_bisection(oracle, n, config.c, config.estimator.delta)
    else:
        trace = actpass(oracle, n, config.k, config.c, config.estimator)
    return abs(trace.t_hat - t)


def trial_errors(config: ExperimentConfig, n: int) -> np.ndarray:
    """Point errors of every trial in one cell, ordered by trial index."""
    sigma = config.sigma_law.at(n)
    workers = _workers()
    if workers == 1:
        errs = [_trial(config, n, sigma, i) for i in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(lambda i: _trial(config, n, sigma, i), range(config.trials)))
    return np.asarray(errs)


def run_cell(config: ExperimentConfig, n: int) -> tuple[float, float]:
    """Mean point error and its standard error over ``config.trials`` trials."""
    errs = trial_errors(config, n)
    mean = math.fsum(errs) / len(errs)
    sd = math.sqrt(math.fsum((errs - mean) ** 2) / (len(errs) - 1))
    return mean, sd / math.sqrt(len(errs))


@dataclass(frozen=True)
class CellResult:
    n: int
    sigma: float
    mean_error: float
    stderr: float


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical_exponent: float
    regime: str
    passed: bool
    tolerance: float = DEFAULT_TOLERANCE

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "theoretical_exponent": self.theoretical_exponent,
            "regime": self.regime,
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


def fit_rate(
    points,
    theoretical: float = math.nan,
    regime: str = LARGE_NOISE,
    tolerance: float = DEFAULT_TOLERANCE,
) -> RateFit:
    """Least-squares line through ``(log n, log error)``.

    Zero errors are floored at ``1e-12`` with a warning so that noiseless
    cells can still be fitted.

    Raises
    ------
    DegenerateFit
        Fewer than 3 points, non-finite values, or a single distinct ``n``.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise DegenerateFit("need at least 3 (n, error) points")
    n, err = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(pts)) or np.any(n <= 0) or np.any(err < 0):
        raise DegenerateFit("points must be finite with positive n and non-negative error")
    if len(np.unique(n)) < 2:
        raise DegenerateFit("need at least two distinct n")
    if np.any(err == 0):
        warnings.warn(f"zero errors floored at {ERROR_FLOOR} before fitting", RuntimeWarning, stacklevel=2)
        err = np.maximum(err, ERROR_FLOOR)
    res = linregress(np.log(n), np.log(err))
    r2 = float(min(max(res.rvalue**2, 0.0), 1.0))
    ok = bool(abs(res.slope - theoretical) <= tolerance) if math.isfinite(theoretical) else False
    return RateFit(float(res.slope), float(res.intercept), r2, float(theoretical), regime, ok, tolerance)


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list[CellResult]
    fit: RateFit

    def rows(self) -> list[dict]:
        c = self.config
        return [
            {
                "mode": c.mode,
                "k": c.k,
                "c": c.c,
                "sigma": cell.sigma,
                "n": cell.n,
                "trials": c.trials,
                "mean_error": cell.mean_error,
                "stderr": cell.stderr,
            }
            for cell in self.cells
        ]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "fit": self.fit.to_dict(), "cells": self.rows()}


def run_sweep(config: ExperimentConfig, tolerance: float = DEFAULT_TOLERANCE) -> SweepResult:
    cells = []
    for n in config.n_grid:
        mean, se = run_cell(config, n)
        cells.append(CellResult(n, config.sigma_law.at(n), mean, se))
    theo, regime = theoretical_exponent(config.mode, config.k, config.sigma_law)
    fit = fit_rate([(c.n, c.mean_error) for c in cells], theo, regime, tolerance)
    return SweepResult(config, cells, fit)


def adversarial_thresholds(sigma: float) -> tuple[float, ...]:
    """Small threshold set standing in for the supremum over the class."""
    edge = 1.0 - sigma - 0.01
    return (0.0, 0.3, -0.3, edge, -edge)


def run_worst_case(config: ExperimentConfig, n: int, include_random: bool = True) -> tuple[float, float, float | str]:
    """Largest mean error over :func:`adversarial_thresholds` (and a randomized threshold).

    Returns ``(mean_error, stderr, t)`` for the worst threshold.
    """
    sigma = config.sigma_law.at(n)
    edge = 1.0 - sigma - 0.01
    candidates: list[float | Randomized] = list(adversarial_thresholds(sigma))
    if include_random:
        candidates.append(Randomized(-edge, edge))
    worst = (-1.0, 0.0, 0.0)
    for t in candidates:
        mean, se = run_cell(replace(config, t=t), n)
        if mean > worst[0]:
            worst = (mean, se, "randomized" if isinstance(t, Randomized) else t)
    return worst


# -- prefactor scan ----------------------------------------------------------


@dataclass
class PrefactorRow:
    sigma: float
    intercept: float
    adjusted_intercept: float
    sweep: SweepResult


@dataclass
class PrefactorScan:
    mode: str
    k: float
    rows: list[PrefactorRow]
    sigma_exponent: float
    adjusted_sigma_exponent: float
    expected: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.adjusted_sigma_exponent - self.expected) <= self.tolerance

    @property
    def raw_passed(self) -> bool:
        return abs(self.sigma_exponent - self.expected) <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "sigma_exponent": self.sigma_exponent,
            "adjusted_sigma_exponent": self.adjusted_sigma_exponent,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "rows": [
                {"sigma": r.sigma, "intercept": r.intercept, "adjusted_intercept": r.adjusted_intercept}
                for r in self.rows
            ],
        }


def prefactor_scan(
    base: ExperimentConfig, sigma_values, tolerance: float = 0.2, min_span: float = 4.0
) -> PrefactorScan:
    """Fit how the large-noise error prefactor scales with sigma.

    For each sigma the intercept is fitted with the slope held at -1/2, then
    ``log(intercept)`` is regressed on ``log(sigma)``.  Active runs split the
    budget over ``E = ceil(log2(1/sigma))`` epochs, which multiplies the error
    by ``sqrt(E)``; the adjusted exponent divides that factor out and is the
    one compared with the prediction.  The sigma values must span at least
    a factor ``min_span``.

    Raises
    ------
    RegimeViolation
        If any ``(sigma, n)`` cell is not in the large-noise regime.
    """
    sigmas = sorted(float(s) for s in sigma_values)
    if len(sigmas) < 3 or sigmas[-1] / sigmas[0] < min_span * (1 - 1e-9):
        raise BadParams(f"need at least 3 sigma values spanning a factor of {min_span}")
    for s in sigmas:
        for n in base.n_grid:
            if cell_regime(base.mode, base.k, s, n) != LARGE_NOISE:
                raise RegimeViolation(f"cell sigma={s}, n={n} is not in the large-noise regime")
    rows = []
    for s in sigmas:
        sweep = run_sweep(replace(base, sigma_law=Constant(s)))
        logn = np.log([c.n for c in sweep.cells])
        loge = np.log([max(c.mean_error, ERROR_FLOOR) for c in sweep.cells])
        icpt = float(np.mean(loge + 0.5 * logn))
        adj = icpt - 0.5 * math.log(n_epochs(s)) if base.mode == ACTIVE else icpt
        rows.append(PrefactorRow(s, icpt, adj, sweep))
    ls = np.log(sigmas)
    raw = float(linregress(ls, [r.intercept for r in rows]).slope)
    adj = float(linregress(ls, [r.adjusted_intercept for r in rows]).slope)
    return PrefactorScan(base.mode, base.k, rows, raw, adj, sigma_exponent(base.mode, base.k), tolerance)


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def sweep_csv(results) -> str:
    """CSV text with one row per cell across all ``results``."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(CSV_COLUMNS)
    for res in results:
        for row in res.rows():
            out.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def sweep_json(results) -> str:
    return json.dumps([r.to_dict() for r in results], sort_keys=True, indent=2)
