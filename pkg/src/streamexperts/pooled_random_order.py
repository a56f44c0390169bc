"""Pool algorithm for random-order streams, with and without a known best cost.

``PooledRandomOrder`` runs a sequential predictor (learning rate delta/2) on
a pool of ``k = ceil(16 n log2^2 n / (delta^2 T))`` experts and redraws the
pool once every member's cost since the anchor exceeds the allowance
``(M/T) s + 4 sqrt(s ln T)`` for a window of ``s`` observed days.

``EstimatedPooledRandomOrder`` learns the best expert's average cost
``gamma`` by binary search over ``ceil(2 log2(1/delta))`` short epochs and
then runs the known-cost algorithm on the rest of the stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import INNER
from .core import ExpertChooser, Instance, Mode, TrialReport, drive
from .pooled_adversarial import _draw_pool, _lg, _pool_size

POOL_CONSTANT = 16
EPOCH_REGRET = 1 / 100

_ROUND_WORDS = 4  # start, round index, day counter, cost estimate
_SEARCH_WORDS = 3  # gamma, epoch index, epoch best average


@dataclass(frozen=True)
class Alg5Params:
    delta: float
    k: int
    inner_epsilon: float


def alg5_params(n: int, T: int, delta: float, constant: float = POOL_CONSTANT) -> Alg5Params:
    if delta <= 0:
        raise ValueError("delta must be positive")
    k = _pool_size(constant * n * _lg(n) ** 2 / (delta**2 * T), n, "random-order pool")
    return Alg5Params(delta, k, delta / 2)


def alg5_in_premise(n: int, T: int, delta: float) -> dict:
    return {"delta": delta > math.sqrt(16 * _lg(n) ** 2 / T)}


def alg5_threshold(M_est: float, T: int, t: int, u: int) -> float:
    """Cost allowance ``(M/T)(t-u) + 4 sqrt((t-u) ln T)`` for the window since ``u``."""
    if t < u:
        raise ValueError(f"window end {t} precedes its anchor {u}")
    s = t - u
    return (M_est / T) * s + 4.0 * math.sqrt(s * math.log(T))


def resample_due(since_costs, M_est: float, T: int, t: int, u: int) -> bool:
    """True when every pool member's cost since ``u`` exceeds the allowance."""
    return bool((np.asarray(since_costs) > alg5_threshold(M_est, T, t, u)).all())


class PooledRandomOrder(ExpertChooser):
    """Known-cost pool algorithm.

    The anchor ``u`` is the day before the pool's first observed day, so the
    allowance window ``t - u`` counts exactly the days its members were
    scored.  ``inject`` forces an expert into the first pool.
    """

    def __init__(self, n, k, M_est, horizon, inner_epsilon, rng, inner="mw",
                 mode=Mode.CONTINUOUS, inject=None, delta=None):
        super().__init__(mode)
        if not 1 <= k <= n:
            raise ValueError(f"pool size must be in [1, {n}], got {k}")
        self.n = n
        self.k = self.capacity = k
        self.rng = rng
        self.inner_cls = INNER[inner]
        self.delta = delta
        self.round_index = 1
        self.events = []
        self.first_pool_resampled = False
        self.meter.charge(_ROUND_WORDS)
        self.reset(M_est, horizon, inner_epsilon, anchor=-1, inject=inject, first=True)

    @classmethod
    def for_regret(cls, n, T, delta, M, rng, inner="mw", mode=Mode.CONTINUOUS, inject=None, k=None):
        p = alg5_params(n, T, delta)
        return cls(n, p.k if k is None else k, M, T, p.inner_epsilon, rng, inner, mode,
                   inject=inject, delta=delta)

    def reset(self, M_est, horizon, inner_epsilon, anchor=None, inject=None, first=False):
        """Start a fresh pool for a phase of ``horizon`` days with cost estimate ``M_est``.

        ``anchor`` is the last day before the phase (default: the day before now).
        """
        if not first:
            self._release()
        self.M_est = M_est
        self.horizon = max(int(horizon), 2)
        self.inner_epsilon = min(inner_epsilon, 0.5)
        self.u = self.t - 1 if anchor is None else anchor
        self._fill(inject)

    def _fill(self, inject=None):
        self.pool = _draw_pool(self.rng, self.n, self.k, inject)
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
        if resample_due(self.since, self.M_est, self.horizon, t, self.u):
            self._on_resample(t)
            if self.round_index == 1:
                self.first_pool_resampled = True
            self._release()
            self._fill()
            self.u = t
            self.round_index += 1
            self.events.append(("resample", t))

    def _on_resample(self, t):
        pass

    def step(self, day):
        """Feed one :class:`DayRecord`; return ``(chosen expert, events)``."""
        discrete = self.mode is Mode.DISCRETE
        self.begin_day(day.predictions if discrete else None)
        self.choose()
        self.observe(day.outcome if discrete else day.costs)
        return self.last_pick, list(self.events)


@dataclass(frozen=True)
class SearchSchedule:
    ell: int
    epoch_len: int


def search_schedule(T: int, delta: float) -> SearchSchedule:
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1) for the cost search")
    lg = math.log2(1 / delta)
    ell = math.ceil(2 * lg)
    epoch_len = math.floor(delta * T / (2 * lg))
    if epoch_len < 1 or ell * epoch_len > T:
        raise ValueError(f"{ell} epochs of {epoch_len} days do not fit in T={T}")
    return SearchSchedule(ell, epoch_len)


def gamma_update(gamma: float, epoch_best: float, j: int, delta: float) -> float:
    """Binary-search step on the average-cost estimate after epoch ``j`` (1-based)."""
    step = 1.0 / 2 ** (j + 1)
    if gamma > (1 + delta) * epoch_best:
        gamma -= step
    elif gamma < (1 - delta) * epoch_best:
        gamma += step
    return min(1.0, max(0.0, gamma))


class EstimatedPooledRandomOrder(PooledRandomOrder):
    """Cost-oblivious variant: search epochs for gamma, then the known-cost run.

    Each epoch starts a fresh pool and measures the smallest average cost
    among the experts it held; that value drives :func:`gamma_update`.  The
    epochs reuse the main pool size ``k``.
    """

    def __init__(self, n, T, delta, rng, inner="mw", mode=Mode.CONTINUOUS, k=None,
                 gamma0=0.5, epoch_regret=EPOCH_REGRET):
        p = alg5_params(n, T, delta)
        self.schedule = search_schedule(T, delta)
        self.T = T
        self.main_epsilon = p.inner_epsilon
        self.epoch_epsilon = epoch_regret / 2
        self.gamma = gamma0
        self.epoch = 1
        self.epoch_best = math.inf
        self.gamma_trace = [gamma0]
        L = self.schedule.epoch_len
        super().__init__(n, p.k if k is None else k, gamma0 * L, L, self.epoch_epsilon, rng,
                         inner, mode, delta=delta)
        self.meter.charge(_SEARCH_WORDS)

    @property
    def searching(self) -> bool:
        return self.epoch <= self.schedule.ell

    def _note_pool(self, t):
        # members' average cost over the days they were scored, up to day t
        s = t - self.u
        if s > 0:
            self.epoch_best = min(self.epoch_best, float(self.since.min()) / s)

    def _on_resample(self, t):
        if self.searching:
            self._note_pool(t)

    def _observe(self, feedback):
        super()._observe(feedback)
        t = self.t
        L = self.schedule.epoch_len
        if not (self.searching and t + 1 == self.epoch * L):
            return
        self._note_pool(t)
        if math.isfinite(self.epoch_best):
            self.gamma = gamma_update(self.gamma, self.epoch_best, self.epoch, self.delta)
        self.gamma_trace.append(self.gamma)
        self.epoch += 1
        self.epoch_best = math.inf
        if self.searching:
            self.reset(self.gamma * L, L, self.epoch_epsilon, anchor=t)
        else:
            rest = self.T - self.schedule.ell * L
            self.reset(self.gamma * rest, rest, self.main_epsilon, anchor=t)
        self.round_index += 1
        self.events.append(("epoch", t))


def estimate_M_run(instance: Instance, delta: float, inner: str = "mw", rng=None, exact=True) -> TrialReport:
    """Run the cost-oblivious random-order algorithm over ``instance``."""
    rng = rng if rng is not None else np.random.default_rng()
    alg = EstimatedPooledRandomOrder(instance.n, instance.T, delta, rng, inner,
                                     instance.cost_model.kind)
    report = drive(alg, instance, exact=exact)
    report.gamma = alg.gamma
    return report


@dataclass(frozen=True)
class PermutationDiagnostic:
    ok: bool
    reason: str = ""


def _day_keys(instance: Instance) -> np.ndarray:
    if instance.discrete_mode:
        table = np.column_stack([instance.outcomes, instance.predictions]).astype(np.float64)
    else:
        table = np.asarray(instance.costs, dtype=np.float64)
    order = np.lexsort(table.T[::-1])
    return table[order]


def permutation_check(base: Instance, shuffled: Instance) -> PermutationDiagnostic:
    """Confirm ``shuffled`` reorders ``base``'s days and leaves each day's experts in place."""
    if base.cost_model != shuffled.cost_model:
        return PermutationDiagnostic(False, "cost models differ")
    if base.costs.shape != shuffled.costs.shape:
        return PermutationDiagnostic(False, f"shape {shuffled.costs.shape} != {base.costs.shape}")
    if not np.array_equal(_day_keys(base), _day_keys(shuffled)):
        return PermutationDiagnostic(False, "day multisets differ (expert columns moved or values changed)")
    return PermutationDiagnostic(True)
