"""Masked reduction from the planted-bias detection problem to binary prediction.

Each row of the bit matrix becomes one day: a fresh fair-coin mask is XORed
into every expert bit, and the day's correct answer is ``mask ^ 1``.  An
expert is then right exactly when its original bit is 1, while in the
all-fair-coin case the outcome is independent of everything the predictor
has seen.  The predictor's accuracy ``S`` is thresholded at
``(1 + delta * c) / 2`` with ``c = sqrt(2 ln 24)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C = math.sqrt(2 * math.log(24))


@dataclass(frozen=True)
class ReductionParams:
    delta: float

    def __post_init__(self):
        if not 0 < self.delta <= 1 / (2 * (C + 1)):
            raise ValueError(
                f"delta must be in (0, {1 / (2 * (C + 1)):.6f}] so that 1/2 + delta(c+1) <= 1"
            )

    @property
    def c(self) -> float:
        return C

    @property
    def offset(self) -> float:
        """Bias ``delta (c + 1)`` of the planted expert."""
        return self.delta * (C + 1)

    @property
    def decision_threshold(self) -> float:
        return (1 + self.delta * C) / 2


@dataclass(frozen=True)
class ReductionVerdict:
    accuracy: float
    decision: int
    correct_days: np.ndarray = None


def mask_day(x_row, mask: int):
    """Return ``(x_row XOR mask, mask XOR 1)``."""
    x = np.asarray(x_row, dtype=np.uint8)
    return x ^ np.uint8(mask), int(mask) ^ 1


def decide(accuracy: float, params: ReductionParams) -> int:
    return 0 if accuracy < params.decision_threshold else 1


def run_reduction(alg, X, params: ReductionParams, rng) -> ReductionVerdict:
    """Drive a discrete-mode predictor through the masked days of ``X``.

    ``rng`` supplies the masks only; the predictor keeps its own randomness.
    """
    X = np.asarray(X, dtype=np.uint8)
    if X.ndim != 2:
        raise ValueError("X must be a T x n bit matrix")
    T = X.shape[0]
    masks = (rng.random(T) < 0.5).astype(np.uint8)
    correct = np.empty(T, dtype=bool)
    for t in range(T):
        masked, y = mask_day(X[t], masks[t])
        alg.begin_day(masked)
        answer = alg.choose()
        correct[t] = (int(answer) ^ int(masks[t])) == 1
        alg.observe(y)
    S = float(correct.mean())
    return ReductionVerdict(S, decide(S, params), correct)
