"""Full-memory sequential predictors: multiplicative weights and FPL*.

Both also serve as the black-box inner predictor that the pool algorithms
run on the resident experts.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ExpertChooser, Instance, Mode

# scratch words kept alongside the per-expert arrays (running total, last pick)
_MW_EXTRA = 2
_FPL_EXTRA = 2


def _check_costs(costs):
    costs = np.asarray(costs, dtype=np.float64)
    if costs.size and (costs.min() < 0.0 or costs.max() > 1.0):
        raise ValueError("costs must lie in [0, 1]")
    return costs


def mw_distribution(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("need at least one expert")
    if (w <= 0).any():
        raise ValueError("weights must be positive")
    return w / w.sum()


def mw_update(weights, costs, epsilon: float) -> np.ndarray:
    """One multiplicative step: ``w_i <- w_i * (1 - epsilon * c_i)``."""
    if not 0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must be in (0, 1/2], got {epsilon}")
    costs = _check_costs(costs)
    return np.asarray(weights, dtype=np.float64) * (1.0 - epsilon * costs)


def _log_distribution(log_w) -> np.ndarray:
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def mw_expected_cost(instance: Instance, epsilon: float) -> float:
    """Exact expected cost ``sum_t sum_j c_j(t) p_j(t)`` of multiplicative weights.

    Weights are kept as logarithms so long runs cannot underflow them to zero.
    """
    if not 0 < epsilon <= 0.5:
        raise ValueError(f"epsilon must be in (0, 1/2], got {epsilon}")
    log_w = np.zeros(instance.n)
    total = 0.0
    for row in instance.costs:
        total += float(_log_distribution(log_w) @ row)
        log_w += np.log1p(-epsilon * _check_costs(row))
    return total


class MultiplicativeWeights(ExpertChooser):
    """Multiplicative weights over ``n`` experts, sampling one expert per day."""

    beta = 1.0

    def __init__(self, n: int, epsilon: float, rng=None, mode: Mode = Mode.CONTINUOUS, meter=None):
        if not 0 < epsilon <= 0.5:
            raise ValueError(f"epsilon must be in (0, 1/2], got {epsilon}")
        super().__init__(mode)
        if meter is not None:
            self.meter = meter
        self.n = self.capacity = n
        self.epsilon = epsilon
        self.rng = rng if rng is not None else np.random.default_rng()
        # one log-weight per expert; exp() of them is the textbook weight vector
        self.log_weights = np.zeros(n)
        self.meter.charge(n + _MW_EXTRA)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def distribution(self) -> np.ndarray:
        return _log_distribution(self.log_weights)

    def pick(self) -> int:
        # inverse-CDF draw; same law as rng.choice(n, p=p) at a fraction of the cost
        cdf = np.cumsum(self.distribution())
        i = int(np.searchsorted(cdf, self.rng.random() * cdf[-1], side="right"))
        return min(i, self.n - 1)

    def expected_cost(self, costs) -> float:
        return float(self.distribution() @ np.asarray(costs, dtype=np.float64))

    def update(self, costs):
        self.log_weights = self.log_weights + np.log1p(-self.epsilon * _check_costs(costs))

    def release(self):
        self.meter.charge(-(self.n + _MW_EXTRA))


def fpl_perturbations(n: int, epsilon: float, rng) -> np.ndarray:
    """Symmetric exponential perturbations ``±2r/epsilon`` with ``r ~ Exp(1)``."""
    r = rng.standard_exponential(n)
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return signs * 2.0 * r / epsilon


def fpl_choose(cum_cost, epsilon: float, rng) -> int:
    """Follow the expert with the lowest perturbed running cost (ties: smallest index)."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    cum_cost = np.asarray(cum_cost, dtype=np.float64)
    return int(np.argmin(cum_cost + fpl_perturbations(cum_cost.size, epsilon, rng)))


class FollowPerturbedLeader(ExpertChooser):
    """FPL* with fresh perturbations every day."""

    beta = 16.0

    def __init__(self, n: int, epsilon: float, rng=None, mode: Mode = Mode.CONTINUOUS, meter=None):
        if not 0 < epsilon <= 1:
            raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
        super().__init__(mode)
        if meter is not None:
            self.meter = meter
        self.n = self.capacity = n
        self.epsilon = epsilon
        self.rng = rng if rng is not None else np.random.default_rng()
        self.cum_cost = np.zeros(n)
        self.meter.charge(n + _FPL_EXTRA)

    def pick(self) -> int:
        return fpl_choose(self.cum_cost, self.epsilon, self.rng)

    def update(self, costs):
        self.cum_cost = self.cum_cost + _check_costs(costs)

    def release(self):
        self.meter.charge(-(self.n + _FPL_EXTRA))


INNER = {"mw": MultiplicativeWeights, "fpl": FollowPerturbedLeader}


def majority_vote(predictions, pool, rng) -> int:
    """Answer given by more than half of ``pool``; an exact tie is a fair coin."""
    pool = np.asarray(pool)
    if pool.size == 0:
        raise ValueError("majority vote over an empty pool")
    ones = int(np.count_nonzero(np.asarray(predictions)[pool]))
    zeros = pool.size - ones
    if ones != zeros:
        return int(ones > zeros)
    return int(rng.random() < 0.5)


def default_mw_epsilon(n: int, T: int) -> float:
    """Learning rate ``sqrt(ln n / T)`` capped at 1/2."""
    return min(0.5, math.sqrt(max(math.log(n), 1e-12) / T))
