"""Regression functions in the margin class P(c, C, k, sigma).

Every function is stored as a tuple of :class:`Piece` objects covering
``[-1, 1]``.  A piece evaluates to

    base + coef * sign(x - center) * |x - center| ** power

on ``[lo, hi)``.  The antiderivative of ``sign(y)|y|^p`` is ``|y|^(p+1)/(p+1)``,
so one closed form integrates any piece, including ones straddling their own
center.  Saturation at 0 and 1 is resolved once at construction time by
splitting pieces at the saturation points, which keeps convolution exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import BadParams, BoundaryViolation

DOMAIN = (-1.0, 1.0)

POWER_SYMMETRIC = "PowerSymmetric"
STEP_PAIR_0 = "StepPair0"
STEP_PAIR_1 = "StepPair1"
POWER_PAIR_0 = "PowerPair0"
POWER_PAIR_1 = "PowerPair1"
TABULATED = "TabulatedPiecewise"
FORMS = (POWER_SYMMETRIC, STEP_PAIR_0, STEP_PAIR_1, POWER_PAIR_0, POWER_PAIR_1, TABULATED)

_TOL = 1e-12


@dataclass(frozen=True)
class MarginParams:
    """Constants of the margin class.

    ``k`` is the margin exponent, ``c <= C`` the margin constants, ``sigma``
    the half-width of the uniform feature noise and ``epsilon0`` the radius
    (in label-probability units) within which the margin condition must hold.
    """

    k: float
    c: float
    C: float = 1.0
    sigma: float = 0.0
    epsilon0: float = 0.5

    def __post_init__(self):
        if not self.k >= 1:
            raise BadParams(f"k must be >= 1, got {self.k}")
        if not 0 < self.c <= 0.5:
            raise BadParams(f"c must lie in (0, 1/2], got {self.c}")
        if not self.C >= self.c:
            raise BadParams(f"C must be >= c, got C={self.C}, c={self.c}")
        if not 0 <= self.sigma < 1:
            raise BadParams(f"sigma must lie in [0, 1), got {self.sigma}")
        if not 0 < self.epsilon0 <= 0.5:
            raise BadParams(f"epsilon0 must lie in (0, 1/2], got {self.epsilon0}")

    @property
    def power(self) -> float:
        return self.k - 1.0


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    base: float
    coef: float = 0.0
    center: float = 0.0
    power: float = 0.0

    def value(self, x):
        y = np.asarray(x, dtype=float) - self.center
        if self.coef == 0.0:
            return np.full_like(y, self.base)
        return self.base + self.coef * np.sign(y) * np.abs(y) ** self.power

    def primitive(self, x):
        """Antiderivative of ``value - 1/2``, up to a per-piece constant."""
        x = np.asarray(x, dtype=float)
        out = (self.base - 0.5) * x
        if self.coef != 0.0:
            p1 = self.power + 1.0
            out = out + self.coef * np.abs(x - self.center) ** p1 / p1
        return out


def _split_saturation(piece: Piece) -> list[Piece]:
    """Split a piece where it hits 0 or 1 and replace the tails by constants."""
    if piece.coef == 0.0 or piece.power == 0.0:
        vals = [piece.base - abs(piece.coef), piece.base + abs(piece.coef)]
        if min(vals) < -_TOL or max(vals) > 1 + _TOL:
            raise BadParams("step piece leaves [0, 1]; reduce c")
        return [piece]

    def crossing(target):
        r = (target - piece.base) / piece.coef
        return piece.center + math.copysign(abs(r) ** (1.0 / piece.power), r)

    x_one, x_zero = crossing(1.0), crossing(0.0)
    if piece.coef > 0:
        left, right = (x_zero, 0.0), (x_one, 1.0)
    else:
        left, right = (x_one, 1.0), (x_zero, 0.0)

    out = []
    lo, hi = piece.lo, piece.hi
    if left[0] > lo:
        cut = min(left[0], hi)
        out.append(Piece(lo, cut, left[1]))
        lo = cut
    mid_hi = min(hi, max(right[0], lo))
    if mid_hi > lo:
        out.append(replace(piece, lo=lo, hi=mid_hi))
        lo = mid_hi
    if hi > lo:
        out.append(Piece(lo, hi, right[1]))
    return out


def _normalize(pieces) -> tuple[Piece, ...]:
    out: list[Piece] = []
    for p in pieces:
        if p.hi <= p.lo:
            continue
        out.extend(q for q in _split_saturation(p) if q.hi > q.lo)
    return tuple(out)


@dataclass(frozen=True)
class RegressionFunction:
    """A member (or candidate member) of P(c, C, k, sigma).

    Instances are immutable and evaluate vectorised: ``m(x)`` accepts scalars
    or arrays and returns ``P(Y=+ | X=x)``.
    """

    params: MarginParams
    t: float
    form: str
    pieces: tuple[Piece, ...]
    a: float | None = None
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    _los: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.form not in FORMS:
            raise BadParams(f"unknown form {self.form!r}")
        object.__setattr__(self, "_los", np.array([p.lo for p in self.pieces]))

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._los, x, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(x)
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.pieces[j].value(x[sel])
        return np.clip(out, 0.0, 1.0)

    def breakpoints(self) -> np.ndarray:
        """Points where ``m`` may fail to be smooth: piece edges and interior centers."""
        pts = {p.lo for p in self.pieces} | {p.hi for p in self.pieces}
        pts |= {p.center for p in self.pieces if p.coef != 0.0 and p.lo < p.center < p.hi}
        return np.array(sorted(pts))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "form": self.form,
            "k": self.params.k,
            "c": self.params.c,
            "C": self.params.C,
            "sigma": self.params.sigma,
            "epsilon0": self.params.epsilon0,
            "t": self.t,
        }
        if self.a is not None:
            d["a"] = self.a
        if self.table is not None:
            d["table"] = {"x": list(self.table[0]), "m": list(self.table[1])}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_threshold(t: float, sigma: float):
    lo, hi = DOMAIN
    if t - lo < sigma - _TOL or hi - t < sigma - _TOL:
        raise BoundaryViolation(f"threshold {t} is closer than sigma={sigma} to the boundary")


def make_power(params: MarginParams, t: float) -> RegressionFunction:
    """``m(x) = clip(1/2 + c sign(x-t) |x-t|^(k-1))``.

    For ``k = 1`` this is the step ``1/2 -/+ c`` with ``m(t) = 1/2``.
    """
    _check_threshold(t, params.sigma)
    piece = Piece(DOMAIN[0], DOMAIN[1], 0.5, params.c, t, params.power)
    return RegressionFunction(params, float(t), POWER_SYMMETRIC, _normalize([piece]))


def lb_beta(c: float, C: float, k: float) -> float:
    """Knee factor of the k > 1 hypothesis pair: ``1 / (1 - (c/C)^(1/(k-1)))``."""
    if k <= 1:
        raise BadParams("beta is only defined for k > 1")
    if not c < C:
        raise BadParams(f"beta is undefined for c >= C (c={c}, C={C})")
    return 1.0 / (1.0 - (c / C) ** (1.0 / (k - 1.0)))


def lb_origin(sigma: float) -> float:
    """Where the shifted-domain origin of the k > 1 pair sits inside [-1, 1]."""
    return DOMAIN[0] + sigma


def to_shifted(x, sigma: float):
    """Map [-1, 1] coordinates onto the shifted domain [-sigma, 2 - sigma]."""
    return np.asarray(x, dtype=float) - lb_origin(sigma)


def from_shifted(x, sigma: float):
    return np.asarray(x, dtype=float) + lb_origin(sigma)


def make_lb_pair(params: MarginParams, a: float) -> tuple[RegressionFunction, RegressionFunction]:
    """Two-hypothesis pair used for the lower bounds.

    ``k = 1``: steps ``1/2 -/+ c`` at ``-a`` and ``+a``.

    ``k > 1``: on the shifted domain ``[-sigma, 2-sigma]`` (realised inside
    ``[-1, 1]`` via :func:`from_shifted`), ``P0`` has its threshold at 0 and
    ``P1`` at ``a``; ``P1`` follows the power law around ``a`` up to
    ``beta*a + sigma`` and coincides with ``P0`` afterwards.
    """
    if a < 0:
        raise BadParams(f"separation a must be >= 0, got {a}")
    sigma = params.sigma
    p = params.power
    if params.k == 1:
        _check_threshold(-a, sigma)
        _check_threshold(a, sigma)
        p0 = Piece(DOMAIN[0], DOMAIN[1], 0.5, params.c, -a, 0.0)
        p1 = Piece(DOMAIN[0], DOMAIN[1], 0.5, params.c, a, 0.0)
        return (
            RegressionFunction(params, -float(a), STEP_PAIR_0, _normalize([p0]), a=float(a)),
            RegressionFunction(params, float(a), STEP_PAIR_1, _normalize([p1]), a=float(a)),
        )

    beta = lb_beta(params.c, params.C, params.k)
    o = lb_origin(sigma)
    knee = o + beta * a + sigma
    if knee > DOMAIN[1] + _TOL:
        raise BoundaryViolation(f"beta*a + sigma = {beta * a + sigma} does not fit the shifted domain")
    _check_threshold(o, sigma)
    _check_threshold(o + a, sigma)
    f0 = RegressionFunction(
        params, o, POWER_PAIR_0, _normalize([Piece(DOMAIN[0], DOMAIN[1], 0.5, params.c, o, p)]), a=float(a)
    )
    pieces1 = [
        Piece(DOMAIN[0], knee, 0.5, params.c, o + a, p),
        Piece(knee, DOMAIN[1], 0.5, params.c, o, p),
    ]
    f1 = RegressionFunction(params, o + a, POWER_PAIR_1, _normalize(pieces1), a=float(a))
    return f0, f1


def make_tabulated(params: MarginParams, xs, ms, t: float | None = None) -> RegressionFunction:
    """Piecewise-linear interpolant through ``(xs, ms)`` on ``[-1, 1]``.

    The nodes must start at -1 and end at 1. When ``t`` is omitted it is the
    first root of ``m - 1/2`` along the interpolant.
    """
    xs = np.asarray(xs, dtype=float)
    ms = np.asarray(ms, dtype=float)
    if xs.ndim != 1 or xs.shape != ms.shape or len(xs) < 2:
        raise BadParams("table needs matching 1-d x and m arrays with >= 2 nodes")
    if np.any(np.diff(xs) <= 0) or xs[0] != DOMAIN[0] or xs[-1] != DOMAIN[1]:
        raise BadParams("table x nodes must increase strictly from -1 to 1")
    if np.any(ms < 0) or np.any(ms > 1):
        raise BadParams("table values must lie in [0, 1]")
    if t is None:
        s = ms - 0.5
        hits = np.nonzero((s[:-1] <= 0) & (s[1:] > 0))[0]
        if len(hits) == 0:
            raise BadParams("table never crosses 1/2")
        i = hits[0]
        t = xs[i] + (xs[i + 1] - xs[i]) * (-s[i]) / (s[i + 1] - s[i])
    _check_threshold(t, params.sigma)
    pieces = []
    for x0, x1, y0, y1 in zip(xs[:-1], xs[1:], ms[:-1], ms[1:]):
        pieces.append(Piece(float(x0), float(x1), float(y0), float((y1 - y0) / (x1 - x0)), float(x0), 1.0))
    return RegressionFunction(
        params, float(t), TABULATED, _normalize(pieces), table=(tuple(xs.tolist()), tuple(ms.tolist()))
    )


def from_dict(d: dict[str, Any]) -> RegressionFunction | tuple[RegressionFunction, RegressionFunction]:
    """Inverse of :meth:`RegressionFunction.to_dict`.

    Pair forms rebuild both hypotheses and return the requested member; pass
    ``form="pair"`` to get the tuple.
    """
    params = MarginParams(
        k=float(d["k"]),
        c=float(d["c"]),
        C=float(d.get("C", 1.0)),
        sigma=float(d.get("sigma", 0.0)),
        epsilon0=float(d.get("epsilon0", 0.5)),
    )
    form = d.get("form", POWER_SYMMETRIC)
    if form == POWER_SYMMETRIC:
        return make_power(params, float(d["t"]))
    if form == TABULATED:
        table = d["table"]
        return make_tabulated(params, table["x"], table["m"], d.get("t"))
    if form in (STEP_PAIR_0, STEP_PAIR_1, POWER_PAIR_0, POWER_PAIR_1, "pair"):
        pair = make_lb_pair(params, float(d["a"]))
        if form == "pair":
            return pair
        return pair[0] if form in (STEP_PAIR_0, POWER_PAIR_0) else pair[1]
    raise BadParams(f"unknown form {form!r}")


def from_json(text: str):
    return from_dict(json.loads(text))


# -- membership -------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    worst_x: float | None
    violation: float


@dataclass(frozen=True)
class MembershipReport:
    margin: ConditionResult  # (T)
    antisymmetry: ConditionResult  # (M)
    boundary: ConditionResult  # (B)
    threshold: ConditionResult  # m(t) = 1/2

    @property
    def passed(self) -> bool:
        return self.margin.passed and self.antisymmetry.passed and self.boundary.passed and self.threshold.passed

    def as_dict(self) -> dict[str, dict]:
        return {
            name: {"passed": r.passed, "worst_x": r.worst_x, "violation": r.violation}
            for name, r in (
                ("T", self.margin),
                ("M", self.antisymmetry),
                ("B", self.boundary),
                ("threshold", self.threshold),
            )
        }


def _worst(x, excess, tol) -> ConditionResult:
    if len(excess) == 0:
        return ConditionResult(True, None, 0.0)
    i = int(np.argmax(excess))
    v = max(float(excess[i]), 0.0)
    return ConditionResult(v <= tol, float(x[i]) if v > 0 else None, v)


def check_membership(m: RegressionFunction, grid_step: float = 1e-4, tol: float = _TOL) -> MembershipReport:
    """Grid check of conditions (T), (M), (B) and ``m(t) = 1/2``.

    (T) is tested with upper constant ``C`` at grid points where
    ``|m(x) - 1/2| < epsilon0``; saturated points are therefore excluded when
    ``epsilon0 = 1/2``.  (M) is tested on 1000 offsets in ``[0, sigma]`` or at
    ``grid_step`` spacing, whichever is finer.
    """
    if grid_step <= 0:
        raise BadParams("grid_step must be positive")
    prm, t = m.params, m.t
    lo, hi = DOMAIN
    x = np.linspace(lo, hi, int(round((hi - lo) / grid_step)) + 1)
    x = x[x != t]
    dev = np.abs(m(x) - 0.5)
    active = dev < prm.epsilon0
    xa, da = x[active], dev[active]
    r = np.abs(xa - t) ** prm.power
    excess = np.maximum(prm.c * r - da, da - prm.C * r)
    margin = _worst(xa, excess, tol)

    if prm.sigma > 0:
        n_delta = max(1000, int(np.ceil(prm.sigma / grid_step)) + 1)
        delta = np.linspace(0.0, prm.sigma, n_delta)
        ok = (t - delta >= lo) & (t + delta <= hi)
        delta = delta[ok]
        resid = np.abs((m(t + delta) - 0.5) - (0.5 - m(t - delta)))
        anti = _worst(t + delta, resid, tol)
    else:
        anti = ConditionResult(True, None, 0.0)

    gap = prm.sigma - min(t - lo, hi - t)
    boundary = ConditionResult(gap <= tol, float(t) if gap > tol else None, max(gap, 0.0))
    tv = abs(float(m(t)) - 0.5)
    threshold = ConditionResult(tv <= tol, float(t) if tv > tol else None, tv)
    return MembershipReport(margin, anti, boundary, threshold)
