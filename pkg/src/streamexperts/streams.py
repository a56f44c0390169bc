"""Instance generators for the stream models used in the experiments.

Every generator is a pure function of its arguments.  Randomness comes from
``numpy.random.SeedSequence``: the outcome column and each expert column get
their own spawned substream, so the value of a column never depends on how
many other columns are drawn or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Instance

_OUTCOMES, _COLUMNS, _EXTRA = 0, 1, 2


def children(seed, count: int):
    """``count`` child SeedSequences of ``seed``, independent of any earlier ``spawn`` calls."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    key = tuple(ss.spawn_key)
    return [np.random.SeedSequence(ss.entropy, spawn_key=key + (i,), pool_size=ss.pool_size)
            for i in range(count)]


def _streams(seed):
    return children(seed, 3)


def _column_uniforms(ss: np.random.SeedSequence, n: int, T: int) -> np.ndarray:
    out = np.empty((T, n))
    for i, child in enumerate(children(ss, n)):
        out[:, i] = np.random.default_rng(child).random(T)
    return out


@dataclass(frozen=True)
class IidSpec:
    n: int
    T: int
    accuracies: Sequence[float]
    seed: int = 0

    def __post_init__(self):
        if len(self.accuracies) != self.n:
            raise ValueError(f"need {self.n} accuracies, got {len(self.accuracies)}")


def gen_iid(spec: IidSpec) -> Instance:
    """Fair-coin outcomes; expert ``i`` is right each day with probability ``accuracies[i]``."""
    acc = np.asarray(spec.accuracies, dtype=np.float64)
    if ((acc < 0) | (acc > 1)).any():
        raise ValueError("accuracies must lie in [0, 1]")
    s_out, s_cols, _ = _streams(spec.seed)
    y = (np.random.default_rng(s_out).random(spec.T) < 0.5).astype(np.uint8)
    right = _column_uniforms(s_cols, spec.n, spec.T) < acc
    preds = np.where(right, y[:, None], 1 - y[:, None]).astype(np.uint8)
    return Instance.discrete(preds, y, meta={"generator": "iid", "seed": spec.seed})


def planted_accuracies(n: int, best: float, others: float, index: int = 0):
    acc = [others] * n
    acc[index] = best
    return acc


def permute_days(base: Instance, seed) -> Instance:
    """Uniformly random reordering of the days; expert order within a day is kept."""
    rng = np.random.default_rng(seed)
    return base.select_days(rng.permutation(base.T))


@dataclass(frozen=True)
class DiffDistSpec:
    n: int
    T: int
    epsilon: float
    case: str  # "NO" or "YES"
    planted_index: Optional[int] = None
    seed: int = 0


def gen_diffdist(spec: DiffDistSpec) -> np.ndarray:
    """T x n bit matrix: fair coins, except the planted column has bias ``1/2 + epsilon`` (YES)."""
    if not 0 <= spec.epsilon <= 0.5:
        raise ValueError(f"epsilon must be in [0, 1/2], got {spec.epsilon}")
    case = spec.case.upper()
    if case not in ("NO", "YES"):
        raise ValueError(f"case must be YES or NO, got {spec.case!r}")
    _, s_cols, s_extra = _streams(spec.seed)
    u = _column_uniforms(s_cols, spec.n, spec.T)
    p = np.full(spec.n, 0.5)
    if case == "YES":
        L = spec.planted_index
        if L is None:
            L = int(np.random.default_rng(s_extra).integers(spec.n))
        if not 0 <= L < spec.n:
            raise ValueError(f"planted index {L} outside [0, {spec.n})")
        p[L] += spec.epsilon
    return (u < p).astype(np.uint8)


def buildup_schedule(k0: int, T: int):
    """Phases of the accumulation counterexample as ``(first_wrong_day, last_wrong_day, experts)``.

    After an all-correct opening of ``L = T // k0`` days, phase ``j`` starts at
    day ``L * 2**(j-1)`` and makes a strict majority of the surviving experts
    wrong until a ``1/2`` drop rule (counted from day 0) removes them.
    """
    if k0 < 2 or k0 & (k0 - 1):
        raise ValueError(f"k0 must be a power of two >= 2, got {k0}")
    L = T // k0
    if L < 1:
        raise ValueError(f"T={T} is shorter than k0={k0}")
    survivors = list(range(k0))
    phases = []
    tau = L
    while survivors and tau < T:
        m = len(survivors)
        wrong, survivors = survivors[: m // 2 + 1], survivors[m // 2 + 1:]
        # wrong on days tau .. 2*tau (0-indexed): removed at the end of day 2*tau
        phases.append((tau, min(2 * tau, T - 1), wrong))
        tau *= 2
    return L, phases


def gen_buildup(k0: int, T: int) -> Instance:
    """Accumulation counterexample for rate-based elimination without a log factor.

    Every outcome is 1.  A whole-population pool that drops experts wrong
    on more than half the days since the round began errs on every day after
    the opening phase.
    """
    L, phases = buildup_schedule(k0, T)
    preds = np.ones((T, k0), dtype=np.uint8)
    for first, last, wrong in phases:
        preds[first:last + 1, wrong] = 0
    return Instance.discrete(preds, np.ones(T, dtype=np.uint8),
                             meta={"generator": "buildup", "k0": k0, "opening": L})


def gen_planted_bursts(n: int, T: int, M: int, burst_len: int, seed) -> Instance:
    """One designated expert errs on exactly ``M`` days in bursts of ``burst_len``.

    Bursts are separated by at least one correct day; the last burst holds the
    remainder when ``burst_len`` does not divide ``M``.  Other experts are
    right with probability 1/2.
    """
    if not 0 <= M <= T:
        raise ValueError(f"need 0 <= M <= T, got M={M}")
    if M > 0 and not 1 <= burst_len <= M:
        raise ValueError(f"need 1 <= burst_len <= M, got burst_len={burst_len}")
    s_out, s_cols, s_extra = _streams(seed)
    extra = np.random.default_rng(s_extra)
    star = int(extra.integers(n))
    lengths = [burst_len] * (M // burst_len) + ([M % burst_len] if M and M % burst_len else [])
    b = len(lengths)
    free = T - M - max(b - 1, 0)
    if free < 0:
        raise ValueError(f"cannot place {b} separated bursts totalling {M} days in T={T}")
    wrong = np.zeros(T, dtype=bool)
    if b:
        # spread the spare correct days over the b+1 gaps (stars and bars)
        cuts = np.sort(extra.integers(0, free + 1, size=b))
        gaps = np.diff(np.concatenate([[0], cuts]))
        pos = 0
        for i, (g, ln) in enumerate(zip(gaps, lengths)):
            pos += int(g) + (1 if i else 0)
            wrong[pos:pos + ln] = True
            pos += ln
    y = (np.random.default_rng(s_out).random(T) < 0.5).astype(np.uint8)
    right = _column_uniforms(s_cols, n, T) < 0.5
    right[:, star] = ~wrong
    preds = np.where(right, y[:, None], 1 - y[:, None]).astype(np.uint8)
    return Instance.discrete(preds, y, meta={"generator": "bursts", "designated": star})


def gen_uniform_costs(n: int, T: int, seed, width: float = 1.0, means=None) -> Instance:
    """Continuous instance with costs drawn uniform on ``[0, 2*mean_i]`` clipped to the width."""
    s_out, s_cols, _ = _streams(seed)
    u = _column_uniforms(s_cols, n, T)
    if means is None:
        return Instance.continuous(u * width, width)
    means = np.asarray(means, dtype=np.float64)
    return Instance.continuous(np.clip(2 * means * u, 0, 1) * width, width)
