"""Pool algorithms for arbitrary-order streams.

``PooledMajority`` keeps a pool of ``k`` experts, predicts by majority vote
and drops members whose mistake rate since the round started exceeds a
threshold; an empty pool is redrawn.  ``PooledSequential`` handles [0, 1]
costs by running a full-memory predictor on the pool and redrawing the whole
pool once every member's average cost since the round started exceeds
``delta / 8``.

Days are 0-indexed.  A round's anchor ``start`` is the first day the current
pool is observed, so a member's rate on day ``t`` is its cost over
``t - start + 1`` days.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import INNER, majority_vote
from .core import ExpertChooser, Mode, Predictor

# start, round index, day counter
_ROUND_WORDS = 3


def _lg(n: int) -> float:
    # log base 2, floored at 1 so a single expert gets a finite threshold
    return max(math.log2(n), 1.0)


def _pool_size(raw: float, n: int, what: str) -> int:
    k = max(1, math.ceil(raw - 1e-9))
    if k > n:
        raise ValueError(f"{what}: pool size {k} exceeds n={n}; delta is below the premise bound")
    return k


@dataclass(frozen=True)
class Alg3Params:
    delta: float
    k: int
    elim_threshold: float


def alg3_params(n: int, T: int, delta: float) -> Alg3Params:
    """Pool size ``ceil(16 n log2^2 n / (T delta))`` and drop rate ``delta / (8 log2 n)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    k = _pool_size(16 * n * _lg(n) ** 2 / (T * delta), n, "pooled majority")
    return Alg3Params(delta, k, delta / (8 * _lg(n)))


def alg3_in_premise(n: int, T: int, delta: float, M: float) -> dict:
    lg2 = _lg(n) ** 2
    return {
        "delta": delta > 16 * lg2 / T,
        # the proof needs the delta^2 form, which is stricter than the statement
        "best_cost": M <= delta**2 * T / (128 * lg2),
    }


def _draw_pool(rng, n: int, k: int, inject=None) -> np.ndarray:
    pool = rng.choice(n, size=k, replace=False)
    if inject is not None and inject not in pool:
        pool[rng.integers(k)] = inject
    return pool


class PooledMajority(Predictor):
    """Majority vote over a resident pool with rate-based elimination (discrete costs)."""

    def __init__(self, n: int, k: int, threshold: float, rng, delta=None):
        super().__init__(Mode.DISCRETE)
        if not 1 <= k <= n:
            raise ValueError(f"pool size must be in [1, {n}], got {k}")
        self.n = n
        self.k = self.capacity = k
        self.threshold = threshold
        self.delta = delta
        self.rng = rng
        self.round_index = 1
        self.start = 0
        self.events = []
        self.meter.charge(_ROUND_WORDS)
        self._fill()

    @classmethod
    def for_regret(cls, n: int, T: int, delta: float, rng, k=None):
        p = alg3_params(n, T, delta)
        return cls(n, p.k if k is None else k, p.elim_threshold, rng, delta=delta)

    def _fill(self):
        self.pool = _draw_pool(self.rng, self.n, self.k)
        self.mistakes = np.zeros(self.k, dtype=np.int64)
        self.meter.charge(2 * self.k)

    def _choose(self):
        self._answer = majority_vote(self._predictions, self.pool, self.rng)
        return self._answer

    def expected_cost(self, costs) -> float:
        wrong = int(np.count_nonzero(np.asarray(costs)[self.pool]))
        right = self.pool.size - wrong
        return 0.5 if wrong == right else float(wrong > right)

    def _observe(self, outcome):
        t = self.t
        self.events = []
        wrong = self._predictions[self.pool] != outcome
        self.mistakes += wrong
        elapsed = t - self.start + 1
        drop = self.mistakes > self.threshold * elapsed
        if drop.any():
            self.events.extend(("eliminate", int(i)) for i in self.pool[drop])
            keep = ~drop
            self.meter.charge(-2 * int(drop.sum()))
            self.pool = self.pool[keep]
            self.mistakes = self.mistakes[keep]
        if self.pool.size == 0:
            self._fill()
            self.start = t + 1
            self.round_index += 1
            self.events.append(("resample", t))

    def step(self, day):
        """Feed one discrete :class:`DayRecord`; return ``(prediction, events)``."""
        if day.predictions is None:
            raise ValueError("pooled majority needs discrete-mode days")
        self.begin_day(day.predictions)
        answer = self.choose()
        self.observe(day.outcome)
        return answer, list(self.events)

    def check_retention(self):
        """Every member still resident is within the drop rate."""
        elapsed = self.t - self.start
        if elapsed <= 0:
            return True
        return bool((self.mistakes <= self.threshold * elapsed).all())


def naive_eliminator(n: int, delta: float, rng) -> PooledMajority:
    """Counterexample fixture: whole-population pool, drop rate ``delta / 4``, no log factor."""
    return PooledMajority(n, n, delta / 4, rng, delta=delta)


def round_mistake_bound(round, delta: float, n: int) -> float:
    """Per-round mistake ceiling ``length * delta / 2 + 4 log2 n``."""
    length = round.length if hasattr(round, "length") else int(round)
    return length * delta / 2 + 4 * math.log2(n)


@dataclass(frozen=True)
class Alg4Params:
    delta: float
    beta: float
    k: int
    inner_epsilon: float
    resample_threshold: float


def alg4_params(n: int, T: int, delta: float, beta: float = 1.0) -> Alg4Params:
    """Pool size ``ceil(16 beta n ln n ln T / (T delta))``, redraw rate ``delta / 8``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    raw = 16 * beta * n * math.log(max(n, 2)) * math.log(max(T, 2)) / (T * delta)
    k = _pool_size(raw, n, "pooled sequential")
    return Alg4Params(delta, beta, k, 0.5, delta / 8)


def alg4_in_premise(n: int, T: int, delta: float, M: float, beta: float = 1.0) -> dict:
    ln_n = math.log(max(n, 2))
    return {
        "delta": delta > 16 * beta * ln_n**2 / T,
        "best_cost": M <= delta**2 * T / (128 * beta * ln_n),
    }


class PooledSequential(ExpertChooser):
    """Inner sequential predictor on a resident pool, redrawn when every member is bad.

    ``resample_threshold=None`` disables redrawing.
    """

    def __init__(self, n, k, resample_threshold, rng, inner="mw", inner_epsilon=0.5,
                 mode=Mode.CONTINUOUS, delta=None):
        super().__init__(mode)
        if not 1 <= k <= n:
            raise ValueError(f"pool size must be in [1, {n}], got {k}")
        self.n = n
        self.k = self.capacity = k
        self.resample_threshold = resample_threshold
        self.rng = rng
        self.inner_cls = INNER[inner]
        self.inner_epsilon = inner_epsilon
        self.delta = delta
        self.round_index = 1
        self.start = 0
        self.events = []
        self.meter.charge(_ROUND_WORDS)
        self._fill()

    @classmethod
    def for_regret(cls, n, T, delta, rng, inner="mw", mode=Mode.CONTINUOUS, k=None):
        p = alg4_params(n, T, delta, INNER[inner].beta)
        return cls(n, p.k if k is None else k, p.resample_threshold, rng, inner,
                   p.inner_epsilon, mode, delta=delta)

    def _fill(self):
        self.pool = _draw_pool(self.rng, self.n, self.k)
        self.since = np.zeros(self.k)
        self.inner = self.inner_cls(self.k, self.inner_epsilon, self.rng, meter=self.meter)
        self.meter.charge(2 * self.k)

    def _release(self):
        self.inner.release()
        self.meter.charge(-2 * self.k)

    def pick(self) -> int:
        return int(self.pool[self.inner.pick()])

    def expected_cost(self, costs) -> float:
        return self.inner.expected_cost(np.asarray(costs)[self.pool])

    def update(self, costs):
        t = self.t
        self.events = []
        local = np.asarray(costs, dtype=np.float64)[self.pool]
        self.inner.update(local)
        self.since += local
        if self.resample_threshold is None:
            return
        elapsed = t - self.start + 1
        if (self.since > self.resample_threshold * elapsed).all():
            self._release()
            self._fill()
            self.start = t + 1
            self.round_index += 1
            self.events.append(("resample", t))

    def step(self, day):
        """Feed one :class:`DayRecord`; return ``(chosen expert, events)``."""
        discrete = self.mode is Mode.DISCRETE
        self.begin_day(day.predictions if discrete else None)
        self.choose()
        self.observe(day.outcome if discrete else day.costs)
        return self.last_pick, list(self.events)


def bad_days_oracle(costs, threshold: float) -> set:
    """Days ``t`` with some ``e >= t`` whose mean cost over ``[t, e]`` exceeds ``threshold``.

    ``costs`` is the best expert's per-day cost column.  Brute force, O(T^2).
    """
    m = np.asarray(costs, dtype=np.float64)
    T = m.size
    bad = set()
    prefix = np.concatenate([[0.0], np.cumsum(m)])
    for t in range(T):
        sums = prefix[t + 1:] - prefix[t]
        lengths = np.arange(1, T - t + 1)
        if (sums > threshold * lengths + 1e-12).any():
            bad.add(t)
    return bad
