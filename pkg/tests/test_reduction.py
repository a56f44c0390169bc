import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from streamexperts.baselines import FollowPerturbedLeader, MultiplicativeWeights, default_mw_epsilon
from streamexperts.core import Mode, Predictor
from streamexperts.reduction import C, ReductionParams, decide, mask_day, run_reduction
from streamexperts.streams import DiffDistSpec, gen_diffdist


class Constant(Predictor):
    capacity = 0

    def __init__(self, answer=1):
        super().__init__(Mode.DISCRETE)
        self.answer = answer

    def _choose(self):
        return self.answer

    def _observe(self, outcome):
        pass


class Follow(Predictor):
    """Always repeats one expert's (masked) prediction."""

    capacity = 1

    def __init__(self, index):
        super().__init__(Mode.DISCRETE)
        self.index = index

    def _choose(self):
        return int(self._predictions[self.index])

    def _observe(self, outcome):
        pass


def test_params_constants():
    p = ReductionParams(0.1)
    assert C == pytest.approx(math.sqrt(2 * math.log(24)))
    assert p.c == pytest.approx(2.5211, abs=1e-4)
    assert p.offset == pytest.approx(0.1 * (C + 1))
    assert p.decision_threshold == pytest.approx(0.626, abs=1e-3)


@pytest.mark.parametrize("delta", [0.0, -0.1, 0.15, 1 / (2 * (C + 1)) + 1e-9])
def test_params_reject(delta):
    with pytest.raises(ValueError):
        ReductionParams(delta)


def test_params_upper_edge():
    p = ReductionParams(1 / (2 * (C + 1)))
    assert 0.5 + p.offset == pytest.approx(1.0)


def test_mask_day_examples():
    x = np.array([1, 0, 1])
    m, y = mask_day(x, 0)
    assert m.tolist() == [1, 0, 1] and y == 1
    m, y = mask_day(x, 1)
    assert m.tolist() == [0, 1, 0] and y == 0
    assert np.flatnonzero(m == y).tolist() == [0, 2]


@given(arrays(np.uint8, st.integers(1, 16), elements=st.integers(0, 1)), st.integers(0, 1))
def test_correct_set_invariance(x, mask):
    masked, y = mask_day(x, mask)
    assert np.array_equal(masked == y, x == 1)


@given(st.floats(0, 1), st.floats(0.001, 0.14))
def test_decision_rule(S, delta):
    p = ReductionParams(delta)
    assert decide(S, p) == int(S >= (1 + delta * C) / 2)


def test_single_day():
    p = ReductionParams(0.1)
    for seed in range(10):
        v = run_reduction(Constant(1), np.array([[1, 0]], dtype=np.uint8), p, np.random.default_rng(seed))
        assert v.accuracy in (0.0, 1.0) and v.decision == int(v.accuracy)


def test_follow_planted_column():
    p = ReductionParams(0.1)
    X = gen_diffdist(DiffDistSpec(4, 10_000, 0.25, "YES", planted_index=2, seed=1))
    v = run_reduction(Follow(2), X, p, np.random.default_rng(0))
    assert abs(v.accuracy - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / 10_000)
    assert v.decision == 1


def test_no_case_decides_zero():
    p = ReductionParams(0.1)
    decisions = []
    for seed in range(30):
        X = gen_diffdist(DiffDistSpec(8, 500, p.offset, "NO", seed=seed))
        decisions.append(run_reduction(Constant(1), X, p, np.random.default_rng(seed)).decision)
    assert decisions.count(0) >= 20


def test_rejects_non_matrix():
    with pytest.raises(ValueError):
        run_reduction(Constant(1), np.zeros(5), ReductionParams(0.1), np.random.default_rng(0))


@pytest.mark.parametrize("make", [
    lambda rng: Constant(1),
    lambda rng: MultiplicativeWeights(16, default_mw_epsilon(16, 10_000), rng, Mode.DISCRETE),
    lambda rng: FollowPerturbedLeader(16, 0.5, rng, Mode.DISCRETE),
], ids=["constant", "mw", "fpl"])
def test_no_case_masking_independence(make):
    p = ReductionParams(0.1)
    T, seeds = 10_000, 100
    hits, lagged = [], []
    for seed in range(seeds):
        X = gen_diffdist(DiffDistSpec(16, T, p.offset, "NO", seed=seed))
        rng = np.random.default_rng(10_000 + seed)
        v = run_reduction(make(rng), X, p, np.random.default_rng(20_000 + seed))
        c = v.correct_days.astype(float)
        hits.append(c.mean())
        lagged.append(np.mean((c[1:] - 0.5) * (c[:-1] - 0.5)) / 0.25)
    N = T * seeds
    assert abs(np.mean(hits) - 0.5) <= 3 * math.sqrt(0.25 / N)
    assert abs(np.mean(lagged)) <= 3 / math.sqrt(N)
