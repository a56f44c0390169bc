"""Instances, the predictor contract, regret and word-level memory accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np


class ProtocolError(RuntimeError):
    """A predictor was driven out of the begin_day -> choose -> observe order."""


class Mode(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class CostModel:
    kind: Mode
    width: float = 1.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"cost width must be positive, got {self.width}")
        if self.kind is Mode.DISCRETE and self.width != 1.0:
            raise ValueError("discrete costs have width 1")


@dataclass(frozen=True)
class DayRecord:
    costs: np.ndarray
    predictions: Optional[np.ndarray] = None
    outcome: Optional[int] = None


class Instance:
    """An immutable T x n table of expert costs (and predictions/outcomes in discrete mode).

    Continuous costs are stored divided by the width, so every cost seen by a
    predictor lies in [0, 1].
    """

    def __init__(self, cost_model, costs, predictions=None, outcomes=None, meta=None):
        self.cost_model = cost_model
        self.costs = np.asarray(costs)
        if self.costs.ndim != 2 or self.costs.shape[0] < 1 or self.costs.shape[1] < 1:
            raise ValueError("costs must be a non-empty T x n array")
        self.predictions = None if predictions is None else np.asarray(predictions, dtype=np.uint8)
        self.outcomes = None if outcomes is None else np.asarray(outcomes, dtype=np.uint8)
        self.meta = dict(meta or {})
        for arr in (self.costs, self.predictions, self.outcomes):
            if arr is not None:
                arr.flags.writeable = False

    @classmethod
    def discrete(cls, predictions, outcomes, meta=None):
        predictions = np.asarray(predictions)
        outcomes = np.asarray(outcomes)
        if predictions.ndim != 2 or outcomes.shape != (predictions.shape[0],):
            raise ValueError("predictions must be T x n and outcomes length T")
        if not (np.isin(predictions, (0, 1)).all() and np.isin(outcomes, (0, 1)).all()):
            raise ValueError("discrete answers must be 0 or 1")
        predictions = predictions.astype(np.uint8)
        outcomes = outcomes.astype(np.uint8)
        costs = (predictions != outcomes[:, None]).astype(np.uint8)
        return cls(CostModel(Mode.DISCRETE), costs, predictions, outcomes, meta)

    @classmethod
    def continuous(cls, costs, width=1.0, meta=None):
        costs = np.asarray(costs, dtype=np.float64)
        if costs.ndim != 2:
            raise ValueError("costs must be a T x n array")
        if np.isnan(costs).any() or (costs < 0).any() or (costs > width).any():
            raise ValueError(f"continuous costs must lie in [0, {width}]")
        return cls(CostModel(Mode.CONTINUOUS, float(width)), costs / width, meta=meta)

    @property
    def T(self) -> int:
        return self.costs.shape[0]

    @property
    def n(self) -> int:
        return self.costs.shape[1]

    @property
    def discrete_mode(self) -> bool:
        return self.cost_model.kind is Mode.DISCRETE

    def day(self, t: int) -> DayRecord:
        if self.discrete_mode:
            return DayRecord(self.costs[t], self.predictions[t], int(self.outcomes[t]))
        return DayRecord(self.costs[t])

    def __iter__(self) -> Iterator[DayRecord]:
        return (self.day(t) for t in range(self.T))

    def __len__(self):
        return self.T

    def column_costs(self) -> np.ndarray:
        return self.costs.sum(axis=0, dtype=np.float64)

    def select_days(self, order) -> "Instance":
        order = np.asarray(order)
        preds = None if self.predictions is None else self.predictions[order]
        outs = None if self.outcomes is None else self.outcomes[order]
        return Instance(self.cost_model, self.costs[order], preds, outs, self.meta)

    def same_as(self, other: "Instance") -> bool:
        if self.cost_model != other.cost_model or self.costs.shape != other.costs.shape:
            return False
        if not np.array_equal(self.costs, other.costs):
            return False
        if self.discrete_mode:
            return np.array_equal(self.predictions, other.predictions) and np.array_equal(
                self.outcomes, other.outcomes
            )
        return True


def best_expert_cost(instance: Instance):
    """Return ``(index, cost)`` of the best expert; ties go to the smallest index."""
    totals = instance.column_costs()
    i = int(np.argmin(totals))
    return i, float(totals[i])


def regret_of(alg_cost: float, best_cost: float, T: int) -> float:
    if T < 1:
        raise ValueError("regret needs at least one day")
    return (alg_cost - best_cost) / T


@dataclass
class MemoryMeter:
    """Counts resident words; one word per expert index, counter or weight."""

    current_words: int = 0
    peak_words: int = 0

    def charge(self, delta_words: int) -> "MemoryMeter":
        new = self.current_words + delta_words
        if new < 0:
            raise ValueError(f"memory accounting went negative ({new} words)")
        self.current_words = new
        self.peak_words = max(self.peak_words, new)
        return self


def meter_charge(meter: MemoryMeter, delta_words: int) -> MemoryMeter:
    """Pure form of :meth:`MemoryMeter.charge`."""
    return MemoryMeter(meter.current_words, meter.peak_words).charge(delta_words)


class Predictor:
    """Streaming predictor contract.

    Each day the driver calls ``begin_day`` with the expert predictions
    (discrete mode; ``None`` in continuous mode), then ``choose``, then
    ``observe`` with the outcome (discrete) or the full cost row (continuous).
    ``choose`` returns an answer in discrete mode and an expert index in
    continuous mode.
    """

    #: experts the memory bound is charged against (k for pools, n otherwise)
    capacity: int

    def __init__(self, mode: Mode):
        self.mode = mode
        self.meter = MemoryMeter()
        self.t = 0
        self._phase = "idle"

    def words(self) -> int:
        return self.meter.current_words

    def _enter(self, expected: str, new: str):
        if self._phase != expected:
            raise ProtocolError(f"{type(self).__name__}: expected phase {expected!r}, in {self._phase!r}")
        self._phase = new

    def begin_day(self, predictions=None):
        self._enter("idle", "open")
        if (predictions is None) != (self.mode is Mode.CONTINUOUS):
            raise ProtocolError("predictions are given in discrete mode only")
        self._predictions = predictions

    def choose(self):
        self._enter("open", "chosen")
        return self._choose()

    def observe(self, feedback):
        self._enter("chosen", "idle")
        self._observe(feedback)
        self._predictions = None
        self.t += 1

    def expected_cost(self, costs) -> float:
        """Expected cost of today's choice given today's cost row (call before observe)."""
        raise NotImplementedError(f"{type(self).__name__} has no closed-form expected cost")

    def _choose(self):
        raise NotImplementedError

    def _observe(self, feedback):
        raise NotImplementedError


class ExpertChooser(Predictor):
    """A predictor that follows one expert per day.

    Subclasses implement ``pick`` (an expert index) and ``update`` (a [0, 1]
    cost row). In discrete mode the chosen expert's prediction is the answer
    and the cost row is derived from the outcome.
    """

    def _choose(self):
        self.last_pick = self.pick()
        if self.mode is Mode.DISCRETE:
            return int(self._predictions[self.last_pick])
        return self.last_pick

    def _observe(self, feedback):
        if self.mode is Mode.DISCRETE:
            costs = (self._predictions != feedback).astype(np.float64)
        else:
            costs = feedback
        self.update(costs)

    def pick(self) -> int:
        raise NotImplementedError

    def update(self, costs):
        raise NotImplementedError


@dataclass
class TrialReport:
    alg_cost: float
    best_cost: float
    regret: float
    rounds: int
    peak_words: int
    round_ledger: list = field(default_factory=list)
    T: int = 0
    best_expert: int = 0
    cost_kind: str = "realized"
    words_trace: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Round:
    """A pool's lifetime as the half-open day range ``[start, end)``."""

    start: int
    end: int
    cost: float

    @property
    def length(self) -> int:
        return self.end - self.start


def drive(predictor: Predictor, instance: Instance, exact: bool = False, trace: bool = True,
          hook=None) -> TrialReport:
    """Run ``predictor`` over ``instance`` day by day under the streaming contract.

    With ``exact`` the algorithm's cost is the sum of its per-day expected
    costs; otherwise it is the realized cost of its choices. Predictors that
    expose ``round_index`` get a per-round cost ledger. ``hook(predictor, t)``
    runs after each day's feedback.
    """
    if predictor.mode is not instance.cost_model.kind:
        raise ProtocolError("predictor and instance cost models differ")
    discrete = instance.discrete_mode
    T = instance.T
    words = np.empty(T + 1, dtype=np.int64) if trace else None
    if trace:
        words[0] = predictor.words()
    has_rounds = hasattr(predictor, "round_index")
    ledger = []
    round_start, round_cost = 0, 0.0
    total = 0.0
    costs_all = instance.costs
    for t in range(T):
        row = costs_all[t]
        if discrete:
            preds = instance.predictions[t]
            y = int(instance.outcomes[t])
            predictor.begin_day(preds)
            answer = predictor.choose()
            c = predictor.expected_cost(row) if exact else float(answer != y)
            before = predictor.round_index if has_rounds else 0
            predictor.observe(y)
        else:
            predictor.begin_day(None)
            chosen = predictor.choose()
            c = predictor.expected_cost(row) if exact else float(row[chosen])
            before = predictor.round_index if has_rounds else 0
            predictor.observe(row)
        total += c
        round_cost += c
        if has_rounds and predictor.round_index != before:
            ledger.append(Round(round_start, t + 1, round_cost))
            round_start, round_cost = t + 1, 0.0
        if hook is not None:
            hook(predictor, t)
        if trace:
            words[t + 1] = predictor.words()
    if has_rounds and round_start < T:
        ledger.append(Round(round_start, T, round_cost))
    best_i, best = best_expert_cost(instance)
    width = instance.cost_model.width
    return TrialReport(
        alg_cost=total * width,
        best_cost=best * width,
        regret=regret_of(total * width, best * width, T),
        rounds=len(ledger),
        peak_words=predictor.meter.peak_words,
        round_ledger=ledger,
        T=T,
        best_expert=best_i,
        cost_kind="expected" if exact else "realized",
        words_trace=words,
    )


# -- instance text format ---------------------------------------------------

def format_instance(instance: Instance) -> str:
    lines = []
    if instance.discrete_mode:
        lines.append(f"{instance.n} {instance.T} discrete")
        for y, row in zip(instance.outcomes, instance.predictions):
            lines.append(" ".join([str(int(y))] + [str(int(v)) for v in row]))
    else:
        width = instance.cost_model.width
        lines.append(f"{instance.n} {instance.T} continuous:{width!r}")
        for row in instance.costs * width:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty instance file")
    header = rows[0]
    if len(header) != 3:
        raise ValueError(f"bad header {' '.join(header)!r}; expected 'n T mode'")
    n, T, mode = int(header[0]), int(header[1]), header[2]
    body = rows[1:]
    if len(body) != T:
        raise ValueError(f"header says T={T} but found {len(body)} day lines")
    if mode == "discrete":
        table = np.array([[int(v) for v in r] for r in body])
        if table.shape != (T, n + 1):
            raise ValueError(f"discrete day lines need 1 + {n} fields")
        return Instance.discrete(table[:, 1:], table[:, 0])
    if mode.startswith("continuous:"):
        width = float(mode.split(":", 1)[1])
        table = np.array([[float(v) for v in r] for r in body])
        if table.shape != (T, n):
            raise ValueError(f"continuous day lines need {n} fields")
        return Instance.continuous(table, width)
    raise ValueError(f"unknown mode {mode!r}")


def write_instance(instance: Instance, path) -> None:
    Path(path).write_text(format_instance(instance), encoding="utf-8")


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))
