import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from streamexperts.baselines import mw_expected_cost
from streamexperts.core import DayRecord, Instance, Mode, Round, drive
from streamexperts.pooled_adversarial import (
    PooledMajority,
    PooledSequential,
    alg3_in_premise,
    alg3_params,
    alg4_in_premise,
    alg4_params,
    bad_days_oracle,
    naive_eliminator,
    round_mistake_bound,
)
from streamexperts.streams import gen_buildup


def dday(preds, y):
    preds = np.asarray(preds, dtype=np.uint8)
    return DayRecord((preds != y).astype(np.uint8), preds, y)


def cday(costs):
    return DayRecord(np.asarray(costs, dtype=np.float64))


# -- parameters --------------------------------------------------------------

def test_alg3_params():
    p = alg3_params(1024, 8192, 0.5)
    assert p.k == math.ceil(16 * 1024 * 100 / (8192 * 0.5)) == 400
    assert p.elim_threshold == pytest.approx(0.5 / 80)


def test_alg3_rejects_k_above_n():
    with pytest.raises(ValueError, match="exceeds"):
        alg3_params(1024, 8192, 0.1)


def test_alg3_premise():
    assert alg3_in_premise(1024, 8192, 0.5, 0) == {"delta": True, "best_cost": True}
    flags = alg3_in_premise(1024, 8192, 0.5, 100)
    assert flags["best_cost"] is False  # 0.25 * 8192 / 12800 = 0.16


def test_alg4_params():
    p = alg4_params(64, 100000, 0.5, beta=1.0)
    assert p.k == math.ceil(16 * 64 * math.log(64) * math.log(100000) / (100000 * 0.5))
    assert p.inner_epsilon == 0.5
    assert p.resample_threshold == 0.5 / 8
    assert alg4_params(64, 100000, 0.5, beta=16.0).k > p.k


def test_alg4_premise():
    assert alg4_in_premise(64, 100000, 0.5, 0)["delta"]
    assert not alg4_in_premise(64, 100, 0.5, 0)["delta"]


# -- pooled majority steps ------------------------------------------------------

def test_zero_error_day_keeps_pool():
    alg = PooledMajority(3, 3, 0.125, np.random.default_rng(0))
    before = sorted(alg.pool)
    answer, events = alg.step(dday([1, 1, 1], 1))
    assert answer == 1 and events == []
    assert sorted(alg.pool) == before


def test_elimination_at_first_crossing():
    # expert 0 right for 6 days, then wrong: 1/7 > 0.125 removes it on day 6
    alg = PooledMajority(2, 2, 0.125, np.random.default_rng(0))
    for t in range(6):
        assert alg.step(dday([1, 1], 1))[1] == []
    _, events = alg.step(dday([0, 1], 1))
    assert events == [("eliminate", 0)]
    assert alg.pool.tolist() == [1]
    assert alg.check_retention()


def test_fraction_at_threshold_is_kept():
    # 1 mistake in 8 days is exactly 0.125, not above it
    alg = PooledMajority(2, 2, 0.125, np.random.default_rng(0))
    for _ in range(7):
        alg.step(dday([1, 1], 1))
    assert alg.step(dday([0, 1], 1))[1] == []
    assert alg.pool.size == 2


def test_joint_crossing_resamples():
    alg = PooledMajority(4, 2, 0.125, np.random.default_rng(0))
    first = set(alg.pool.tolist())
    preds = np.ones(4, dtype=np.uint8)
    preds[list(first)] = 0
    _, events = alg.step(dday(preds, 1))
    assert events[-1] == ("resample", 0)
    assert {e[1] for e in events[:-1]} == first
    assert alg.round_index == 2 and alg.start == 1
    assert alg.pool.size == 2 and len(set(alg.pool.tolist())) == 2


def test_alg3_rejects_continuous_day():
    alg = PooledMajority(2, 2, 0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        alg.step(cday([0.1, 0.2]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(1, 60))
def test_alg3_state_invariants(seed, n, T):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    preds = rng.integers(0, 2, (T, n))
    y = rng.integers(0, 2, T)
    alg = PooledMajority(n, k, 0.2, rng)
    for t in range(T):
        alg.step(dday(preds[t], int(y[t])))
        assert 1 <= alg.pool.size <= k
        assert len(set(alg.pool.tolist())) == alg.pool.size
        assert ((0 <= alg.pool) & (alg.pool < n)).all()
        assert (alg.mistakes >= 0).all() and (alg.mistakes <= alg.t - alg.start).all()
        assert alg.check_retention()
        assert alg.words() == 3 + 2 * alg.pool.size


def test_alg3_expected_cost_ties():
    alg = PooledMajority(2, 2, 0.5, np.random.default_rng(0))
    assert alg.expected_cost(np.array([1, 0])) == 0.5
    assert alg.expected_cost(np.array([1, 1])) == 1.0


# -- per-round mistake bound --------------------------------------------------

def test_round_mistake_bound_examples():
    assert round_mistake_bound(Round(3, 3, 0), 0.5, 16) == 16.0
    assert round_mistake_bound(100, 0.5, 1024) == 65.0
    assert round_mistake_bound(Round(0, 1000, 0), 1e-12, 64) == pytest.approx(24.0)


# -- pooled sequential steps ----------------------------------------------------

def test_zero_cost_member_blocks_resample():
    rng = np.random.default_rng(0)
    alg = PooledSequential(3, 3, 0.1, rng)
    for _ in range(50):
        _, events = alg.step(cday([1.0, 0.0, 1.0]))
        assert events == []
    assert alg.round_index == 1


def test_resample_when_every_member_is_bad():
    # threshold 0.1: both members pay 1 on day 8 (0-indexed), 1/9 > 0.1
    alg = PooledSequential(2, 2, 0.1, np.random.default_rng(0))
    for _ in range(8):
        assert alg.step(cday([0.0, 0.0]))[1] == []
    _, events = alg.step(cday([1.0, 1.0]))
    assert events == [("resample", 8)]
    assert alg.round_index == 2 and alg.start == 9
    assert (alg.since == 0).all()


def test_average_at_threshold_keeps_pool():
    alg = PooledSequential(2, 2, 0.1, np.random.default_rng(0))
    for _ in range(9):
        alg.step(cday([0.0, 0.0]))
    assert alg.step(cday([1.0, 1.0]))[1] == []  # exactly 1/10


def test_first_day_cheap_no_resample():
    alg = PooledSequential(4, 2, 0.1, np.random.default_rng(0))
    assert alg.step(cday([0.1, 0.05, 0.0, 0.1]))[1] == []


def test_threshold_none_never_resamples():
    alg = PooledSequential(2, 2, None, np.random.default_rng(0))
    for _ in range(20):
        alg.step(cday([1.0, 1.0]))
    assert alg.round_index == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 50), st.sampled_from(["mw", "fpl"]))
def test_alg4_state_invariants(seed, n, T, inner):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    costs = rng.random((T, n))
    alg = PooledSequential(n, k, 0.3, rng, inner=inner)
    for t in range(T):
        chosen, _ = alg.step(cday(costs[t]))
        assert chosen in alg.pool or alg.round_index > 1
        assert alg.pool.size == k and len(set(alg.pool.tolist())) == k
        assert (alg.since >= 0).all() and (alg.since <= alg.t - alg.start + 1e-9).all()
        assert alg.words() == 3 + 3 * k + 2


def test_alg4_discrete_mode():
    inst = Instance.discrete([[1, 0, 1]] * 40, [1] * 40)
    rep = drive(PooledSequential(3, 2, 0.1, np.random.default_rng(3), mode=Mode.DISCRETE), inst)
    assert rep.rounds == len(rep.round_ledger) >= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 32), st.integers(1, 500))
def test_alg4_full_pool_matches_mw(seed, n, T):
    rng = np.random.default_rng(seed)
    inst = Instance.continuous(rng.random((T, n)))
    rep = drive(PooledSequential(n, n, None, rng), inst, exact=True)
    assert rep.alg_cost == pytest.approx(mw_expected_cost(inst, 0.5), abs=1e-9)


# -- bad days ------------------------------------------------------------------

def test_bad_days_zero_cost():
    assert bad_days_oracle(np.zeros(10), 0.5) == set()


def test_bad_days_single_spike():
    c = np.zeros(10)
    c[5] = 1
    bad = bad_days_oracle(c, 0.5)
    assert bad == {5}


def brute_bad(c, thr):
    out = set()
    for t in range(len(c)):
        for e in range(t, len(c)):
            if sum(c[t:e + 1]) > thr * (e - t + 1):
                out.add(t)
                break
    return out


@settings(max_examples=40)
@given(arrays(np.float64, st.integers(1, 25), elements=st.floats(0, 1)), st.floats(0.05, 0.95))
def test_bad_days_matches_brute_force(c, thr):
    c = np.round(c, 3)
    assert bad_days_oracle(c, thr) == brute_bad(c.tolist(), thr + 1e-12)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.2, 0.5, 0.8]))
def test_bad_days_count_bound(seed, delta):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 200))
    c = (rng.random(T) < rng.random() * 0.2).astype(float)
    assert len(bad_days_oracle(c, delta / 8)) <= 8 * c.sum() / delta


# -- naive fixture ------------------------------------------------------------

def test_naive_fixture_parameters():
    alg = naive_eliminator(8, 2.0, np.random.default_rng(0))
    assert alg.k == 8 and alg.threshold == 0.5


def test_naive_fixture_accumulates_on_buildup():
    inst = gen_buildup(8, 256)
    alg = naive_eliminator(8, 2.0, np.random.default_rng(0))
    wrong = [alg.step(day)[0] != day.outcome for day in inst]
    opening = inst.meta["opening"]
    assert not any(wrong[:opening])
    assert sum(wrong[opening:]) >= inst.T - opening - 8
