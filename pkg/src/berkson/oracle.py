"""Berkson label oracle.

A query at ``w`` is perturbed to ``x = w + u`` with ``u ~ Unif[-sigma, sigma]``
and answered with ``+1`` with probability ``m(x)``, ``-1`` otherwise.

Each query consumes exactly two doubles from the oracle's stream (noise, then
label), whether it arrives through :meth:`NoisyOracle.query` or in a batch,
so the label sequence depends only on the seed, the stream id and the
sequence of query points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .convolution import admissible_domain, check_admissible
from .errors import BadParams, BudgetExhausted, QueryOutsideDomain
from .function_class import RegressionFunction

GRID = "grid"
UNIFORM = "uniform"


def make_rng(seed: int, stream: int = 0, *substream: int) -> np.random.Generator:
    """Counter-based (Philox) generator; distinct ``(stream, *substream)`` keys are independent."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, substream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Sample:
    w: float
    y: int


@dataclass(frozen=True)
class Samples:
    """Query points and ±1 labels, in query order."""

    w: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.w)

    def __iter__(self) -> Iterator[Sample]:
        for wi, yi in zip(self.w, self.y):
            yield Sample(float(wi), int(yi))


def equispaced(n: int, domain: tuple[float, float]) -> np.ndarray:
    """Midpoints ``lo + (2j - 1)/(2n) * (hi - lo)``, ``j = 1..n``."""
    lo, hi = domain
    return lo + (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n) * (hi - lo)


class NoisyOracle:
    """Sequential label source for one trial.

    Parameters
    ----------
    m : RegressionFunction
        True regression function; its ``params.sigma`` is the noise width
        unless ``sigma`` is given.
    budget : int
        Maximum number of labels this oracle will issue.
    seed, stream : int
        Seed and stream id of the Philox generator.
    """

    def __init__(self, m: RegressionFunction, budget: int, seed: int = 0, stream: int = 0, sigma: float | None = None):
        if budget <= 0:
            raise BadParams("budget must be positive")
        self.m = m
        self.sigma = float(m.params.sigma if sigma is None else sigma)
        self.budget = int(budget)
        self.seed = int(seed)
        self.stream = int(stream)
        self.rng = make_rng(seed, stream)
        self.used = 0
        self._log_w: list[np.ndarray] = []
        self._log_y: list[np.ndarray] = []

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    @property
    def domain(self) -> tuple[float, float]:
        return admissible_domain(self.sigma)

    def query(self, w: float) -> int:
        return int(self.query_many(np.array([w], dtype=float))[0])

    def query_many(self, ws) -> np.ndarray:
        """Answer a batch of queries; all-or-nothing on budget and (Q) errors."""
        ws = np.asarray(ws, dtype=float).ravel()
        if len(ws) > self.remaining:
            raise BudgetExhausted(f"{len(ws)} queries requested, {self.remaining} remaining")
        check_admissible(ws, self.sigma)
        r = self.rng.random((len(ws), 2))
        x = ws + self.sigma * (2.0 * r[:, 0] - 1.0)
        y = np.where(r[:, 1] < self.m(x), 1, -1).astype(np.int8)
        self.used += len(ws)
        self._log_w.append(ws.copy())
        self._log_y.append(y)
        return y

    def passive_batch(self, n: int, design: str = GRID, domain: tuple[float, float] | None = None) -> Samples:
        """Query ``n`` points laid out by ``design`` over ``domain``.

        ``design="grid"`` uses equispaced midpoints; ``"uniform"`` draws the
        points i.i.d. from the same stream before labelling them.
        """
        lo, hi = self.domain if domain is None else domain
        alo, ahi = self.domain
        if lo < alo - 1e-12 or hi > ahi + 1e-12:
            raise QueryOutsideDomain(f"domain [{lo}, {hi}] is not inside the (Q) region [{alo}, {ahi}]")
        if n > self.remaining:
            raise BudgetExhausted(f"{n} queries requested, {self.remaining} remaining")
        if design == GRID:
            w = equispaced(n, (lo, hi))
        elif design == UNIFORM:
            w = self.rng.uniform(lo, hi, size=n)
        else:
            raise BadParams(f"unknown design {design!r}")
        return Samples(w, self.query_many(w))

    @property
    def log(self) -> Samples:
        if not self._log_w:
            return Samples(np.empty(0), np.empty(0, dtype=np.int8))
        return Samples(np.concatenate(self._log_w), np.concatenate(self._log_y))

    def write_log(self, path, trial_id: int = 0, append: bool = False):
        """Write ``trial_id,step,w,y`` rows."""
        log = self.log
        with open(path, "a" if append else "w", newline="") as fh:
            out = csv.writer(fh)
            if not append:
                out.writerow(["trial_id", "step", "w", "y"])
            for step, (w, y) in enumerate(zip(log.w, log.y)):
                out.writerow([trial_id, step, repr(float(w)), int(y)])
