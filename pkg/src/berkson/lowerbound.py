"""Two-hypothesis lower-bound machinery.

A pair of regression functions with thresholds a known distance apart is
convolved with the noise, and the KL divergence between the label
distributions they induce bounds how well any strategy can tell them apart
from ``n`` labels.  Active strategies can put every query at the most
informative point (``n * max_w KL``); passive uniform designs average it
(``n * mean_w KL``).  Solving ``bound(a) = 1`` for ``a`` gives the
lower-bound rate scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .convolution import ConvolvedFunction, admissible_domain, convolve, max_gap, support_window
from .errors import BadParams, BoundaryViolation, DomainError, RootNotBracketed
from .function_class import MarginParams, RegressionFunction, lb_beta, make_lb_pair

SIGMA_SMALL = "SigmaSmall"
SIGMA_LARGE = "SigmaLarge"
ACTIVE = "active"
PASSIVE = "passive"

SCALING_BRACKET = (1.0 / 8.0, 8.0)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def kl_bernoulli(p, q):
    """Exact ``KL(Ber(p) || Ber(q))`` in nats, vectorised.

    Raises
    ------
    DomainError
        If any ``p`` or ``q`` lies outside the open interval (0, 1).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(~((p > 0) & (p < 1))) or np.any(~((q > 0) & (q < 1))):
        raise DomainError("Bernoulli parameters must lie strictly inside (0, 1)")
    out = p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))
    # Rounding can leave tiny negatives when p == q.
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HypothesisPair:
    P0: RegressionFunction
    P1: RegressionFunction
    a: float
    F0: ConvolvedFunction
    F1: ConvolvedFunction

    @property
    def sigma(self) -> float:
        return self.F0.sigma


def make_pair(k: float, sigma: float, a: float, c: float = 0.25, C: float = 1.0) -> HypothesisPair:
    """Build the lower-bound pair for separation ``a`` and convolve both members."""
    params = MarginParams(k=k, c=c, C=C, sigma=sigma)
    P0, P1 = make_lb_pair(params, a)
    return HypothesisPair(P0, P1, float(a), convolve(P0, sigma), convolve(P1, sigma))


def max_separation(k: float, sigma: float, c: float = 0.25, C: float = 1.0) -> float:
    """Largest ``a`` for which the pair still fits the domain."""
    if k == 1:
        return 1.0 - sigma
    return (2.0 - 2.0 * sigma) / lb_beta(c, C, k)


@dataclass(frozen=True)
class KLReport:
    max_pointwise_kl: float
    integrated_kl: float
    active_bound: float
    passive_bound: float
    gap: float
    regime: str

    def to_dict(self) -> dict:
        return {
            "max_pointwise_kl": self.max_pointwise_kl,
            "integrated_kl": self.integrated_kl,
            "active_bound": self.active_bound,
            "passive_bound": self.passive_bound,
            "gap": self.gap,
            "regime": self.regime,
        }


def _segments(pair: HypothesisPair) -> np.ndarray:
    lo, hi = support_window(pair.F0, pair.F1)
    if hi <= lo:
        return np.array([lo])
    k = np.concatenate([pair.F0.kinks(), pair.F1.kinks(), [lo, hi]])
    return np.unique(k[(k >= lo) & (k <= hi)])


def _kl_at(pair: HypothesisPair, w) -> np.ndarray:
    return kl_bernoulli(pair.F1(w), pair.F0(w))


def kl_report(pair: HypothesisPair, n: int, grid_step: float | None = None) -> KLReport:
    """Per-query and cumulative KL between the label laws of a pair.

    The integral uses a 24-node Gauss-Legendre rule on every smooth segment
    between kinks of the two convolved functions, restricted to the window
    where they differ, and is normalised by the width of the query domain.
    The maximum scans each segment at ``grid_step`` spacing (default: 1/64
    of the segment) and polishes the best point with a bounded scalar
    minimiser.
    """
    if n < 1:
        raise BadParams("n must be >= 1")
    sigma = pair.sigma
    regime = SIGMA_SMALL if sigma < pair.a else SIGMA_LARGE
    edges = _segments(pair)
    if len(edges) < 2 or pair.a == 0:
        return KLReport(0.0, 0.0, 0.0, 0.0, 0.0, regime)

    a_, b_ = edges[:-1], edges[1:]
    keep = b_ - a_ > 0
    a_, b_ = a_[keep], b_[keep]
    half = 0.5 * (b_ - a_)
    nodes = (0.5 * (a_ + b_))[:, None] + half[:, None] * _GL_X[None, :]
    vals = _kl_at(pair, nodes.ravel()).reshape(nodes.shape)
    q_lo, q_hi = admissible_domain(sigma)
    integrated = float(np.sum(half * (vals @ _GL_W)) / (q_hi - q_lo))

    best = _segment_max(lambda w: _kl_at(pair, w), a_, b_, grid_step)
    gap = _segment_max(lambda w: np.abs(pair.F1.excess(w) - pair.F0.excess(w)), a_, b_, grid_step)
    return KLReport(best, integrated, n * best, n * integrated, gap, regime)


def _segment_max(f, starts, stops, grid_step) -> float:
    """Maximum of a function that is smooth on each ``[start, stop]``."""
    best = 0.0
    for lo, hi in zip(starts, stops):
        m = 65 if grid_step is None else int(min(max(math.ceil((hi - lo) / grid_step), 8), 4096)) + 1
        w = np.linspace(lo, hi, m)
        vals = f(w)
        i = int(np.argmax(vals))
        best = max(best, float(vals[i]))
        l, r = w[max(i - 1, 0)], w[min(i + 1, m - 1)]
        if r > l:
            res = minimize_scalar(lambda x: -float(f(np.array([x]))[0]), bounds=(l, r), method="bounded",
                                  options={"xatol": 1e-12 * max(1.0, abs(r - l))})
            best = max(best, float(-res.fun))
    return best


# -- gap scaling --------------------------------------------------------------


@dataclass
class ScalingCell:
    sigma: float
    a: float
    regime: str
    gap: float
    predicted: float

    @property
    def ratio(self) -> float:
        return self.gap / self.predicted


@dataclass
class ScalingReport:
    k: float
    c: float
    C: float
    cells: list[ScalingCell] = field(default_factory=list)
    skipped: list[tuple[float, float, str]] = field(default_factory=list)
    bracket: tuple[float, float] = SCALING_BRACKET

    def ratios(self, regime: str) -> np.ndarray:
        return np.array([cell.ratio for cell in self.cells if cell.regime == regime])

    def ratio_range(self, regime: str) -> tuple[float, float] | None:
        r = self.ratios(regime)
        return (float(r.min()), float(r.max())) if len(r) else None

    def regime_passed(self, regime: str) -> bool:
        r = self.ratios(regime)
        return bool(len(r)) and bool(np.all((r >= self.bracket[0]) & (r <= self.bracket[1])))

    @property
    def passed(self) -> bool:
        present = {cell.regime for cell in self.cells}
        return bool(present) and all(self.regime_passed(g) for g in present)

    def exact_large_ratio_error(self) -> float | None:
        """For ``k = 1``: worst ``|ratio - 2c|`` in the large-noise cells."""
        r = self.ratios(SIGMA_LARGE)
        if self.k != 1 or not len(r):
            return None
        return float(np.max(np.abs(r - 2.0 * self.c)))

    def to_dict(self) -> dict:
        out = {
            "k": self.k,
            "c": self.c,
            "C": self.C,
            "bracket": list(self.bracket),
            "passed": self.passed,
            "regimes": {},
            "cells": [
                {"sigma": x.sigma, "a": x.a, "regime": x.regime, "gap": x.gap, "ratio": x.ratio} for x in self.cells
            ],
            "skipped": [{"sigma": s, "a": a, "reason": why} for s, a, why in self.skipped],
        }
        for g in (SIGMA_SMALL, SIGMA_LARGE):
            rng = self.ratio_range(g)
            if rng is not None:
                out["regimes"][g] = {"min_ratio": rng[0], "max_ratio": rng[1], "passed": self.regime_passed(g)}
        err = self.exact_large_ratio_error()
        if err is not None:
            out["exact_2c_error"] = err
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def predicted_gap(k: float, sigma: float, a: float, regime: str) -> float:
    """``a^(k-1)`` when the noise is small, ``sigma^(k-2) a`` when it is large."""
    return a ** (k - 1.0) if regime == SIGMA_SMALL else sigma ** (k - 2.0) * a


def verify_gap_scaling(k: float, c: float, C: float, sigma_grid, a_grid, separation: float = 10.0) -> ScalingReport:
    """Compare ``max_w |F1 - F0|`` with its predicted order over a grid.

    A cell counts as small-noise when ``a >= separation * sigma`` and as
    large-noise when ``sigma >= separation * a``; cells in between, and cells
    whose pair does not fit the domain, are listed in ``skipped``.
    """
    report = ScalingReport(k=k, c=c, C=C)
    for sigma in np.asarray(sigma_grid, dtype=float):
        for a in np.asarray(a_grid, dtype=float):
            if a >= separation * sigma:
                regime = SIGMA_SMALL
            elif sigma >= separation * a:
                regime = SIGMA_LARGE
            else:
                report.skipped.append((float(sigma), float(a), "between regimes"))
                continue
            try:
                pair = make_pair(k, float(sigma), float(a), c, C)
            except (BoundaryViolation, BadParams) as exc:
                report.skipped.append((float(sigma), float(a), str(exc)))
                continue
            gap, _ = max_gap(pair.F0, pair.F1, window=support_window(pair.F0, pair.F1))
            report.cells.append(ScalingCell(float(sigma), float(a), regime, gap, predicted_gap(k, sigma, a, regime)))
    return report


# -- rate from KL ---------------------------------------------------------------


def _bound(k, sigma, n, mode, c, C, a) -> float:
    try:
        rep = kl_report(make_pair(k, sigma, a, c, C), n)
    except DomainError:
        return math.inf
    return rep.active_bound if mode == ACTIVE else rep.passive_bound


def rate_from_kl(k: float, sigma: float, n: int, mode: str, c: float = 0.25, C: float = 1.0, level: float = 1.0) -> float:
    """Separation ``a*`` at which the ``mode`` KL bound over ``n`` labels equals ``level``.

    The root is bracketed by stepping down from the largest admissible
    separation in factors of 10, then polished with Brent's method on
    ``log a``.

    Raises
    ------
    RootNotBracketed
        If the bound stays below ``level`` at the largest separation or
        above it at the smallest one tried.
    """
    if mode not in (ACTIVE, PASSIVE):
        raise BadParams(f"unknown mode {mode!r}")
    if not sigma > 0:
        raise BadParams("rate_from_kl needs sigma > 0")

    def g(log_a):
        b = _bound(k, sigma, n, mode, c, C, math.exp(log_a))
        return math.log(b) - math.log(level) if b > 0 else -math.inf

    hi = math.log(max_separation(k, sigma, c, C) * (1.0 - 1e-9))
    if g(hi) < 0:
        raise RootNotBracketed(f"KL bound stays below {level} for every admissible separation")
    lo = hi
    for _ in range(60):
        lo -= math.log(10.0)
        if g(lo) < 0:
            break
        hi = lo
    else:
        raise RootNotBracketed(f"KL bound exceeds {level} even at separation {math.exp(lo):.3g}")
    return math.exp(brentq(g, lo, hi, xtol=1e-12, rtol=1e-10))
