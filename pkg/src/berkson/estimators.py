"""Threshold estimators: WIDEHIST (passive) and ACTPASS (active).

WIDEHIST bins the labels, averages bin means over a window of ``±sigma/2``
and reports where the smoothed sequence first crosses 1/2.  ACTPASS runs
WIDEHIST in ``E = ceil(log2(1/sigma))`` epochs on domains that halve around
the previous estimate.  When the noise is too small to be detectable the
estimators fall back to their noiseless counterparts: an unsmoothed histogram
for WIDEHIST and majority-vote bisection for the active case.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .convolution import admissible_domain
from .errors import BadParams, DegenerateDomain, TooFewSamples
from .oracle import NoisyOracle, Samples, equispaced

NOISY = "noisy"
NOISELESS = "noiseless"
PHASE_ONE = "phase-one"
PHASE_TWO = "phase-two"

INTERPOLATE = "interpolate"
CENTER = "center"


@dataclass(frozen=True)
class WidehistConfig:
    """Tuning knobs for WIDEHIST.

    ``kappa`` scales the noisy-regime bin width and ``kappa_noiseless`` the
    noiseless one.  ``max_bin_fraction`` caps the noisy bin width at that
    fraction of sigma so the smoothing window always spans several bins.
    ``crossing`` selects how the estimate is read off the crossing pair of
    bins: ``"interpolate"`` (linear interpolation of the smoothed means
    between the two bin centres) or ``"center"`` (centre of the last bin
    below 1/2).
    """

    delta: float = 0.05
    kappa: float = 1.0
    kappa_noiseless: float = 1.0
    bin_width_override: float | None = None
    smoothing_radius_override: float | None = None
    max_bin_fraction: float = 0.25
    min_points_per_bin: int = 2
    crossing: str = INTERPOLATE

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise BadParams(f"delta must lie in (0, 1), got {self.delta}")
        for name in ("kappa", "kappa_noiseless", "max_bin_fraction"):
            if not getattr(self, name) > 0:
                raise BadParams(f"{name} must be positive")
        for name in ("bin_width_override", "smoothing_radius_override"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise BadParams(f"{name} must be positive when given")
        if self.crossing not in (INTERPOLATE, CENTER):
            raise BadParams(f"unknown crossing rule {self.crossing!r}")


@dataclass
class Epoch:
    e: int
    domain: tuple[float, float]
    t_e: float
    phase: str
    budget: int


@dataclass
class EstimateTrace:
    t_hat: float
    domain: tuple[float, float]
    regime: str = NOISY
    bin_width: float = float("nan")
    smoothing_radius: float = 0.0
    centers: np.ndarray = field(default_factory=lambda: np.empty(0))
    raw_means: np.ndarray = field(default_factory=lambda: np.empty(0))
    smoothed: np.ndarray = field(default_factory=lambda: np.empty(0))
    crossing_index: int | None = None
    epochs: list[Epoch] = field(default_factory=list)

    @property
    def bins(self) -> list[tuple[float, float, float]]:
        return list(zip(self.centers.tolist(), self.raw_means.tolist(), self.smoothed.tolist()))

    def to_dict(self) -> dict:
        return {
            "t_hat": self.t_hat,
            "domain": list(self.domain),
            "regime": self.regime,
            "bin_width": self.bin_width,
            "smoothing_radius": self.smoothing_radius,
            "crossing_index": self.crossing_index,
            "bins": [list(b) for b in self.bins],
            "epochs": [
                {"e": ep.e, "domain": list(ep.domain), "t_e": ep.t_e, "phase": ep.phase, "budget": ep.budget}
                for ep in self.epochs
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def noiseless_rate(n: int, k: float, radius: float = 1.0) -> float:
    """Passive noiseless error scale ``(R/n)^(1/(2k-1))``."""
    return (radius / n) ** (1.0 / (2.0 * k - 1.0))


def bin_width(n: int, sigma: float, k: float, c: float, width: float, config: WidehistConfig) -> tuple[float, str]:
    """Bin width and regime for ``n`` points spread over a domain of ``width``.

    Noisy regime: the union-bound width ``(1/c) sqrt(R log(2n/delta) / (sigma^(2k-3) n))``
    with ``R = width/2``, scaled by ``kappa`` and capped at
    ``max_bin_fraction * sigma``.  Noiseless regime (sigma below
    ``(R/n)^(1/(2k-1))``): ``kappa_noiseless * (R/n)^(1/(2k-1))``.  Either way
    the width is floored so each bin holds ``min_points_per_bin`` points on
    average.
    """
    radius = width / 2.0
    floor = config.min_points_per_bin * width / n
    if config.bin_width_override is not None:
        h = config.bin_width_override
        regime = NOISY if sigma > 0 and sigma >= noiseless_rate(n, k, radius) else NOISELESS
        return max(h, floor), regime
    scale = noiseless_rate(n, k, radius)
    if sigma <= 0 or sigma < scale:
        return max(config.kappa_noiseless * scale, floor), NOISELESS
    h = config.kappa / c * math.sqrt(radius * math.log(2.0 * n / config.delta) / (sigma ** (2 * k - 3) * n))
    h = min(h, config.max_bin_fraction * sigma)
    return max(h, floor), NOISY


def smoothing_floor(n: int, sigma: float, k: float, c: float, width: float, delta: float) -> float:
    """Smallest smoothing radius that keeps far-away bins on the right side of 1/2.

    For ``k < 2`` the convolved function flattens out at distance sigma from
    the threshold with margin about ``c sigma^(k-1)``.  Hoeffding plus a union
    bound over at most ``n`` windows needs ``log(2n/delta) / (2 margin^2)``
    points per window for all of them to stay on their side with probability
    ``1 - delta``.  For ``k >= 2`` the margin keeps growing and no floor applies.
    """
    if k >= 2:
        return 0.0
    margin = c * sigma ** (k - 1.0)
    needed = math.log(2.0 * n / delta) / (2.0 * margin**2)
    return needed * width / (2.0 * n)


def _window_sums(values: np.ndarray, half: int) -> np.ndarray:
    cs = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(len(values))
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, len(values))
    return cs[hi] - cs[lo]


def widehist(
    samples: Samples,
    sigma: float,
    k: float,
    c: float,
    domain: tuple[float, float],
    config: WidehistConfig | None = None,
) -> EstimateTrace:
    """Passive threshold estimate from labelled samples on ``domain``.

    Bins of width ``h`` tile ``domain``; ``p_i`` pools the labels of all bins
    whose centres lie within the smoothing radius (``sigma/2`` in the noisy
    regime, 0 in the noiseless one) of bin ``i``, truncated at the domain
    edges.  The estimate is read off the first left-to-right pair with
    ``p_i < 1/2 <= p_{i+1}``.  Without such a pair the estimate is the left
    edge if most bins are positive and the right edge otherwise.
    """
    config = config or WidehistConfig()
    lo, hi = float(domain[0]), float(domain[1])
    width = hi - lo
    if not width > 0:
        raise DegenerateDomain(f"domain [{lo}, {hi}] has no width")
    n = len(samples)
    h, regime = bin_width(max(n, 1), sigma, k, c, width, config)
    if n < 4:
        raise TooFewSamples(f"{n} samples cannot fill 4 bins")
    n_bins = max(int(round(width / h)), 4)
    h = width / n_bins
    centers = lo + (np.arange(n_bins) + 0.5) * h

    idx = np.clip(((samples.w - lo) / h).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    pos = np.bincount(idx, weights=(samples.y > 0).astype(float), minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = pos / counts

    if config.smoothing_radius_override is not None:
        radius = config.smoothing_radius_override
    elif regime == NOISY:
        radius = max(sigma / 2.0, smoothing_floor(n, sigma, k, c, width, config.delta))
    else:
        radius = 0.0
    half = int(math.floor(radius / h + 1e-9))
    wc = _window_sums(counts, half)
    wp = _window_sums(pos, half)
    with np.errstate(invalid="ignore", divide="ignore"):
        smooth = wp / wc
    smooth = _fill_empty(smooth)

    t_hat, crossing = _read_crossing(centers, smooth, lo, hi, config.crossing)
    return EstimateTrace(
        t_hat=float(t_hat),
        domain=(lo, hi),
        regime=regime,
        bin_width=h,
        smoothing_radius=radius,
        centers=centers,
        raw_means=raw,
        smoothed=smooth,
        crossing_index=crossing,
    )


def _fill_empty(p: np.ndarray) -> np.ndarray:
    """Forward/backward fill NaNs from empty windows."""
    if not np.any(np.isnan(p)):
        return p
    ok = ~np.isnan(p)
    if not np.any(ok):
        return np.full_like(p, 0.5)
    idx = np.where(ok, np.arange(len(p)), 0)
    np.maximum.accumulate(idx, out=idx)
    out = p[idx]
    first = np.argmax(ok)
    out[:first] = p[first]
    return out


def _read_crossing(centers, smooth, lo, hi, rule):
    below = smooth < 0.5
    up = np.nonzero(below[:-1] & ~below[1:])[0]
    if len(up) == 0:
        return (lo if np.mean(~below) >= 0.5 else hi), None
    i = int(up[0])
    if rule == CENTER:
        return centers[i], i
    p0, p1 = smooth[i], smooth[i + 1]
    frac = (0.5 - p0) / (p1 - p0)
    return centers[i] + frac * (centers[i + 1] - centers[i]), i


def misclassified_bins(trace: EstimateTrace, t: float) -> np.ndarray:
    """Indices of bins outside ``{i*-1, i*, i*+1}`` on the wrong side of 1/2.

    ``i*`` is the bin containing ``t``.  A bin left of it is misclassified
    when its smoothed mean is at least 1/2, a bin right of it when the mean
    is below 1/2.
    """
    if len(trace.centers) == 0:
        return np.empty(0, dtype=int)
    h = trace.bin_width
    i_star = int(np.clip(np.floor((t - trace.domain[0]) / h), 0, len(trace.centers) - 1))
    idx = np.arange(len(trace.centers))
    wrong = ((idx < i_star - 1) & (trace.smoothed >= 0.5)) | ((idx > i_star + 1) & (trace.smoothed < 0.5))
    return np.nonzero(wrong)[0]


# -- active -------------------------------------------------------------------


def n_epochs(sigma: float) -> int:
    """``E = ceil(log2(1/sigma))``, at least 1."""
    if not 0 < sigma < 1:
        raise BadParams(f"epoch count needs sigma in (0, 1), got {sigma}")
    return max(1, math.ceil(math.log2(1.0 / sigma) - 1e-12))


def actpass(
    oracle: NoisyOracle, n: int, k: float, c: float, config: WidehistConfig | None = None
) -> EstimateTrace:
    """Active threshold estimate using ``n`` labels from ``oracle``.

    Epoch ``e`` spends ``floor(n/E)`` labels (the last epoch also takes the
    remainder) on an equispaced grid over ``D_e`` intersected with the (Q)
    region, runs WIDEHIST there, and sets
    ``D_{e+1} = [t_e - 2^-e, t_e + 2^-e] ∩ [-1, 1]``.
    """
    config = config or WidehistConfig()
    sigma = oracle.sigma
    E = n_epochs(sigma)
    if n < E:
        raise BadParams(f"budget n={n} is smaller than the number of epochs E={E}")
    per_epoch = n // E
    q_lo, q_hi = admissible_domain(sigma)
    dom = (-1.0, 1.0)
    t_prev = 0.0
    epochs: list[Epoch] = []
    last: EstimateTrace | None = None
    for e in range(1, E + 1):
        budget = per_epoch + (n - per_epoch * E if e == E else 0)
        qd = (max(dom[0], q_lo), min(dom[1], q_hi))
        if qd[1] <= qd[0]:
            epochs.append(Epoch(e, dom, t_prev, epochs[-1].phase if epochs else PHASE_ONE, 0))
        else:
            w = equispaced(budget, qd)
            y = oracle.query_many(w)
            last = widehist(Samples(w, y), sigma, k, c, qd, config)
            t_prev = last.t_hat
            phase = PHASE_TWO if last.regime == NOISY else PHASE_ONE
            epochs.append(Epoch(e, dom, t_prev, phase, budget))
        r = 2.0**-e
        dom = (max(-1.0, t_prev - r), min(1.0, t_prev + r))
    trace = last if last is not None else EstimateTrace(t_hat=t_prev, domain=dom)
    trace.t_hat = float(t_prev)
    trace.epochs = epochs
    return trace


def votes_per_node(n: int, c: float, delta: float) -> int:
    """Smallest odd repetition count whose majority errs with total probability <= delta."""
    p_wrong = 0.5 - c
    if p_wrong <= 0:
        return 1
    r = 1
    while r <= n:
        nodes = max(n // r, 1)
        if nodes * binom.sf(r // 2, r, p_wrong) <= delta:
            return r
        r += 2
    return max(1, n if n % 2 else n - 1)


def majority_bisection(oracle: NoisyOracle, n: int, c: float, delta: float = 0.05) -> EstimateTrace:
    """Noiseless active fallback: bisection with a majority vote at every node."""
    lo, hi = admissible_domain(oracle.sigma)
    r = votes_per_node(n, c, delta)
    epochs = []
    for e in range(1, n // r + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        y = oracle.query_many(np.full(r, mid))
        if np.sum(y) > 0:
            hi = mid
        else:
            lo = mid
        epochs.append(Epoch(e, (lo, hi), 0.5 * (lo + hi), PHASE_ONE, r))
    dom = admissible_domain(oracle.sigma)
    return EstimateTrace(t_hat=0.5 * (lo + hi), domain=dom, regime=NOISELESS, epochs=epochs)


def containment_frequency(traces, t: float) -> np.ndarray:
    """Per-epoch fraction of traces whose epoch domain contains ``t``."""
    traces = list(traces)
    if not traces:
        return np.empty(0)
    n_ep = max(len(tr.epochs) for tr in traces)
    hits = np.zeros(n_ep)
    seen = np.zeros(n_ep)
    for tr in traces:
        for j, ep in enumerate(tr.epochs):
            seen[j] += 1
            hits[j] += ep.domain[0] <= t <= ep.domain[1]
    with np.errstate(invalid="ignore"):
        return hits / seen
