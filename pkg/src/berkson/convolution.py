"""Convolution of a regression function with Unif[-sigma, sigma].

``F(w) = (1 / 2 sigma) * integral_{w - sigma}^{w + sigma} m(x) dx`` is the
probability of a positive label when ``w`` is queried under Berkson noise.

Two independent evaluators are provided.  ``"analytic"`` sums closed-form
piece integrals; ``"quadrature"`` only calls ``m`` itself, using composite
Gauss-Legendre rules split at every breakpoint of ``m``.  Both return
``F - 1/2`` internally so that small gaps near the threshold do not drown in
cancellation against 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadParams, QueryOutsideDomain
from .function_class import DOMAIN, RegressionFunction

ANALYTIC = "analytic"
QUADRATURE = "quadrature"

_QTOL = 1e-12
_MAX_GRID = 2_000_001


@lru_cache(maxsize=32)
def _gauss(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return x, w


def admissible_domain(sigma: float) -> tuple[float, float]:
    """Query region allowed by assumption (Q)."""
    return DOMAIN[0] + sigma, DOMAIN[1] - sigma


def check_admissible(w, sigma: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    lo, hi = admissible_domain(sigma)
    if np.any(w < lo - _QTOL) or np.any(w > hi + _QTOL) or np.any(~np.isfinite(w)):
        bad = w[(w < lo - _QTOL) | (w > hi + _QTOL) | ~np.isfinite(w)]
        raise QueryOutsideDomain(f"query {bad.flat[0]!r} violates (Q) with sigma={sigma}")
    return w


@dataclass(frozen=True)
class ConvolvedFunction:
    """Immutable evaluator of ``m * Unif[-sigma, sigma]``."""

    source: RegressionFunction
    sigma: float
    method: str = ANALYTIC
    nodes: int = 64

    @property
    def t(self) -> float:
        return self.source.t

    def excess(self, w) -> np.ndarray:
        """``F(w) - 1/2``."""
        w = check_admissible(w, self.sigma)
        flat = np.atleast_1d(w).ravel()
        if self.method == ANALYTIC:
            out = _analytic_excess(self.source, self.sigma, flat)
        else:
            out = _quadrature_excess(self.source, self.sigma, flat, self.nodes)
        return out.reshape(np.shape(w))

    def __call__(self, w):
        return 0.5 + self.excess(w)

    def kinks(self) -> np.ndarray:
        """Points where ``F`` may fail to be smooth, clipped to the (Q) domain."""
        b = self.source.breakpoints()
        lo, hi = admissible_domain(self.sigma)
        pts = np.concatenate([b - self.sigma, b + self.sigma, [lo, hi]])
        return np.unique(np.clip(pts, lo, hi))


def _analytic_excess(m: RegressionFunction, sigma: float, w: np.ndarray) -> np.ndarray:
    left, right = w - sigma, w + sigma
    acc = np.zeros_like(w)
    for p in m.pieces:
        u = np.clip(left, p.lo, p.hi)
        v = np.clip(right, p.lo, p.hi)
        hit = v > u
        if np.any(hit):
            acc[hit] += p.primitive(v[hit]) - p.primitive(u[hit])
    return acc / (2.0 * sigma)


def _quadrature_excess(m: RegressionFunction, sigma: float, w: np.ndarray, nodes: int) -> np.ndarray:
    xg, wg = _gauss(nodes)
    breaks = m.breakpoints()
    out = np.empty_like(w)
    for i, wi in enumerate(w):
        lo, hi = wi - sigma, wi + sigma
        inner = breaks[(breaks > lo) & (breaks < hi)]
        edges = np.concatenate([[lo], inner, [hi]])
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        x = (0.5 * (a + b))[:, None] + half[:, None] * xg[None, :]
        vals = m(x) - 0.5
        out[i] = np.sum(half * (vals @ wg))
    return out / (2.0 * sigma)


def convolve(
    m: RegressionFunction, sigma: float | None = None, method: str = ANALYTIC, nodes: int = 64
) -> ConvolvedFunction:
    """Build ``F = m * Unif[-sigma, sigma]``; ``sigma`` defaults to ``m.params.sigma``.

    ``nodes`` is the Gauss-Legendre order per smooth segment when
    ``method="quadrature"``.
    """
    sigma = m.params.sigma if sigma is None else float(sigma)
    if not sigma > 0:
        raise BadParams(f"convolution needs sigma > 0, got {sigma}")
    if method not in (ANALYTIC, QUADRATURE):
        raise BadParams(f"unknown method {method!r}")
    if nodes < 1:
        raise BadParams("nodes must be >= 1")
    return ConvolvedFunction(m, sigma, method, int(nodes))


def _default_step(F0: ConvolvedFunction, F1: ConvolvedFunction) -> float:
    b = np.unique(np.concatenate([F0.source.breakpoints(), F1.source.breakpoints()]))
    d = np.diff(b)
    d = d[d > 1e-15]
    scale = min(F0.sigma, float(d.min()) if len(d) else F0.sigma)
    return scale / 100.0


def support_window(F0: ConvolvedFunction, F1: ConvolvedFunction) -> tuple[float, float]:
    """Smallest interval outside which ``F0 == F1``, clipped to the (Q) domain.

    Derived from the breakpoints the two sources do not share: outside the
    sigma-neighbourhood of those points the sources coincide piecewise.
    """
    lo, hi = admissible_domain(F0.sigma)
    b0, b1 = F0.source.breakpoints(), F1.source.breakpoints()
    if F0.source.pieces == F1.source.pieces:
        return lo, lo
    diff = np.setxor1d(b0, b1)
    if len(diff) == 0:
        return lo, hi
    return max(lo, float(diff.min()) - F0.sigma), min(hi, float(diff.max()) + F0.sigma)


def max_gap(
    F0: ConvolvedFunction,
    F1: ConvolvedFunction,
    grid_step: float | None = None,
    window: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Grid maximum of ``|F1 - F0|`` and its location.

    The grid spans ``window`` (default: the whole (Q)-admissible domain) at
    ``grid_step`` spacing (default ``min(sigma, breakpoint spacing) / 100``)
    and always includes the kinks of both functions, so the maximum is exact
    for piecewise-linear gaps.  The grid is capped at two million points.
    """
    if F0.sigma != F1.sigma:
        raise BadParams("both convolved functions must share sigma")
    lo, hi = admissible_domain(F0.sigma) if window is None else window
    if grid_step is None:
        grid_step = _default_step(F0, F1)
    if hi <= lo:
        return 0.0, float(lo)
    n = min(int(np.ceil((hi - lo) / grid_step)) + 1, _MAX_GRID)
    kinks = np.concatenate([F0.kinks(), F1.kinks()])
    kinks = kinks[(kinks >= lo) & (kinks <= hi)]
    w = np.unique(np.concatenate([np.linspace(lo, hi, n), kinks]))
    gap = np.abs(F1.excess(w) - F0.excess(w))
    i = int(np.argmax(gap))
    return float(gap[i]), float(w[i])


def local_slope(F: ConvolvedFunction, h: float) -> float:
    """Symmetric difference quotient ``(F(t+h) - F(t-h)) / 2h`` at the threshold."""
    if not 0 < h <= F.sigma:
        raise BadParams(f"h must lie in (0, sigma], got {h}")
    t = F.t
    up, down = F.excess(np.array([t + h, t - h]))
    return float((up - down) / (2.0 * h))


def curve(m: RegressionFunction, sigma: float, n_points: int = 401) -> np.ndarray:
    """``(w, m(w), F(w))`` rows on an even grid over the (Q)-admissible domain."""
    F = convolve(m, sigma)
    lo, hi = admissible_domain(sigma)
    w = np.linspace(lo, hi, n_points)
    return np.column_stack([w, m(w), F(w)])
