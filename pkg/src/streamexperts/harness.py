"""Seeded experiment orchestration and result tables.

Trial ``i`` of an experiment with base seed ``b`` uses
``SeedSequence(b, spawn_key=(i,))``; its three children seed, in order, the
instance generator, the predictor and any auxiliary draws (reduction masks).
The split is numpy's documented SeedSequence hashing, so the same pair
``(b, i)`` reproduces a trial bit for bit in any process.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import INNER, FollowPerturbedLeader, MultiplicativeWeights, default_mw_epsilon
from .core import Instance, Mode, TrialReport, best_expert_cost, drive, read_instance
from .pooled_adversarial import (
    PooledMajority,
    PooledSequential,
    alg3_in_premise,
    alg4_in_premise,
    naive_eliminator,
    round_mistake_bound,
)
from .pooled_random_order import EstimatedPooledRandomOrder, PooledRandomOrder, alg5_in_premise
from .reduction import ReductionParams, run_reduction
from .streams import (
    children,
    DiffDistSpec,
    IidSpec,
    gen_buildup,
    gen_diffdist,
    gen_iid,
    gen_planted_bursts,
    gen_uniform_costs,
    permute_days,
    planted_accuracies,
)

ALGORITHMS = ("mw", "fpl", "alg3", "alg4", "alg5", "alg5-estimated", "naive-quarter")
POOLED = {"alg3", "alg4", "alg5", "alg5-estimated", "naive-quarter"}
EXACT_BY_DEFAULT = {"mw", "alg4", "alg5", "alg5-estimated"}

#: words allowed on top of 3 per tracked expert (round bookkeeping, scratch)
WORD_SLACK = 16
WORDS_PER_EXPERT = 3


class InvariantViolation(AssertionError):
    pass


def word_ceiling(capacity: int) -> int:
    return WORDS_PER_EXPERT * capacity + WORD_SLACK


def trial_seeds(base_seed: int, trial_index: int):
    """``(stream, predictor, auxiliary)`` SeedSequences for one trial."""
    return children(np.random.SeedSequence(base_seed, spawn_key=(trial_index,)), 3)


# -- configuration -------------------------------------------------------------

@dataclass
class ExperimentConfig:
    algorithm: str
    stream: dict
    delta: Optional[float] = None
    epsilon: Optional[float] = None
    M: Optional[float] = None
    trials: int = 1
    base_seed: int = 0
    output: Optional[str] = None
    exact: Optional[bool] = None
    inner: str = "mw"
    k: Optional[int] = None
    inject_best: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.inner not in INNER:
            raise ValueError(f"unknown inner predictor {self.inner!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.algorithm in POOLED and self.delta is None:
            raise ValueError(f"{self.algorithm} needs delta")

    @property
    def use_exact(self) -> bool:
        return self.algorithm in EXACT_BY_DEFAULT if self.exact is None else self.exact


def _scalar(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return [_scalar(part) for part in text.split(",")]
    return text


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``stream.*`` keys describe the instance source."""
    top, stream = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("stream."):
            stream[key[len("stream."):]] = _scalar(value)
        else:
            top[key] = _scalar(value)
    if "algorithm" not in top:
        raise ValueError("config needs an 'algorithm' key")
    if not stream:
        raise ValueError("config needs stream.* keys")
    known = set(ExperimentConfig.__dataclass_fields__) - {"stream"}
    unknown = set(top) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(stream=stream, **top)


def load_config(path) -> ExperimentConfig:
    cfg = parse_config(Path(path).read_text(encoding="utf-8"))
    if "path" in cfg.stream and not Path(cfg.stream["path"]).is_absolute():
        cfg.stream["path"] = str(Path(path).parent / cfg.stream["path"])
    return cfg


# -- instances and predictors --------------------------------------------------

_PERMUTE_KEY = 99


def _child(seed, key: int) -> np.random.SeedSequence:
    # a substream disjoint from the ones the generators use
    return children(seed, key + 1)[key]


def build_stream(stream: dict, seed):
    """Materialize an instance from a ``stream`` description.

    ``stream['seed']``, when present, pins the instance across trials;
    otherwise the trial's stream substream is used.
    """
    s = dict(stream)
    kind = s.pop("kind", "iid")
    if "seed" in s:
        seed = s.pop("seed")
    random_order = s.pop("random_order", False)
    if kind == "file":
        inst = read_instance(s["path"])
    elif kind == "iid":
        n, T = int(s["n"]), int(s["T"])
        if "accuracies" in s:
            acc = s["accuracies"]
            acc = [acc] * n if not isinstance(acc, list) else acc
        else:
            acc = planted_accuracies(n, float(s.get("best_accuracy", 1.0)),
                                     float(s.get("other_accuracy", 0.5)), int(s.get("best_index", 0)))
        inst = gen_iid(IidSpec(n, T, acc, seed))
    elif kind == "bursts":
        inst = gen_planted_bursts(int(s["n"]), int(s["T"]), int(s["M"]), int(s["burst_len"]), seed)
    elif kind == "buildup":
        inst = gen_buildup(int(s["k0"]), int(s["T"]))
    elif kind == "uniform":
        n, T = int(s["n"]), int(s["T"])
        means = s.get("means")
        inst = gen_uniform_costs(n, T, seed, float(s.get("width", 1.0)), means)
    elif kind == "diffdist":
        # the unmasked view: outcome 1 every day, expert bits as predictions
        X = gen_diffdist(DiffDistSpec(int(s["n"]), int(s["T"]), float(s["epsilon"]),
                                      str(s.get("case", "NO")), s.get("planted_index"), seed))
        inst = Instance.discrete(X, np.ones(X.shape[0], dtype=np.uint8), meta={"generator": "diffdist"})
    else:
        raise ValueError(f"unknown stream kind {kind!r}")
    if random_order:
        inst = permute_days(inst, _child(seed, _PERMUTE_KEY))
    return inst


def build_predictor(cfg: ExperimentConfig, instance, rng, best_index=None, best_cost=None):
    n, T, mode = instance.n, instance.T, instance.cost_model.kind
    a = cfg.algorithm
    if a == "mw":
        eps = cfg.epsilon if cfg.epsilon is not None else default_mw_epsilon(n, T)
        return MultiplicativeWeights(n, eps, rng, mode)
    if a == "fpl":
        eps = cfg.epsilon if cfg.epsilon is not None else min(1.0, math.sqrt(max(math.log(n), 1.0) / T))
        return FollowPerturbedLeader(n, eps, rng, mode)
    if a == "alg3":
        if mode is not Mode.DISCRETE:
            raise ValueError("alg3 runs on discrete instances only")
        return PooledMajority.for_regret(n, T, cfg.delta, rng, k=cfg.k)
    if a == "naive-quarter":
        return naive_eliminator(n, cfg.delta, rng)
    if a == "alg4":
        return PooledSequential.for_regret(n, T, cfg.delta, rng, cfg.inner, mode, k=cfg.k)
    if a == "alg5":
        M = cfg.M if cfg.M is not None else best_cost
        inject = best_index if cfg.inject_best else None
        return PooledRandomOrder.for_regret(n, T, cfg.delta, M, rng, cfg.inner, mode, inject=inject, k=cfg.k)
    if a == "alg5-estimated":
        return EstimatedPooledRandomOrder(n, T, cfg.delta, rng, cfg.inner, mode, k=cfg.k)
    raise ValueError(a)


def premise_flags(cfg: ExperimentConfig, n: int, T: int, M: float) -> dict:
    a = cfg.algorithm
    if a == "alg3":
        return alg3_in_premise(n, T, cfg.delta, M)
    if a == "alg4":
        return alg4_in_premise(n, T, cfg.delta, M, INNER[cfg.inner].beta)
    if a in ("alg5", "alg5-estimated"):
        return alg5_in_premise(n, T, cfg.delta)
    if a == "mw":
        return {"epsilon": cfg.epsilon is None or 0 < cfg.epsilon <= 0.5}
    if a == "fpl":
        return {"epsilon": cfg.epsilon is None or 0 < cfg.epsilon <= 1}
    return {"guarantee": False}


# -- trials ------------------------------------------------------------------

@dataclass
class TrialResult:
    index: int
    seed: int
    report: Optional[TrialReport]
    k: int = 0
    n: int = 0
    premise: dict = field(default_factory=dict)
    status: str = "ok"
    extras: dict = field(default_factory=dict)

    @property
    def in_premise(self) -> bool:
        return all(self.premise.values())


def _seed_label(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def check_invariants(cfg, predictor, report, instance):
    """Raise :class:`InvariantViolation` on the first broken run invariant."""
    trace = report.words_trace
    if trace is not None:
        if (trace < 0).any():
            raise InvariantViolation("negative word count")
        if int(trace.max()) != report.peak_words:
            raise InvariantViolation(f"meter peak {report.peak_words} != replayed max {int(trace.max())}")
    ceiling = word_ceiling(predictor.capacity)
    if report.peak_words > ceiling:
        raise InvariantViolation(f"peak {report.peak_words} words exceeds ceiling {ceiling}")
    if not report.alg_cost <= instance.T * instance.cost_model.width + 1e-9:
        raise InvariantViolation("algorithm cost exceeds T")
    if report.rounds != len(report.round_ledger):
        raise InvariantViolation("round count disagrees with ledger")
    if cfg.algorithm == "alg3":
        for r in report.round_ledger:
            bound = round_mistake_bound(r, cfg.delta, instance.n)
            if r.cost > bound + 1e-9:
                raise InvariantViolation(
                    f"round [{r.start}, {r.end}) made {r.cost} mistakes > bound {bound:.3f}")


def _retention_hook(predictor, t):
    if not predictor.check_retention():
        raise InvariantViolation(f"day {t}: resident expert above the drop rate")


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialResult:
    s_stream, s_alg, _ = trial_seeds(cfg.base_seed, trial_index)
    instance = build_stream(cfg.stream, s_stream)
    best_i, best = best_expert_cost(instance)
    rng = np.random.default_rng(s_alg)
    predictor = build_predictor(cfg, instance, rng, best_i, best)
    hook = _retention_hook if cfg.algorithm == "alg3" else None
    report = drive(predictor, instance, exact=cfg.use_exact, hook=hook)
    check_invariants(cfg, predictor, report, instance)
    extras = {}
    if hasattr(predictor, "gamma"):
        extras["gamma"] = predictor.gamma
    if hasattr(predictor, "first_pool_resampled"):
        extras["first_pool_resampled"] = predictor.first_pool_resampled
    report.words_trace = None
    return TrialResult(
        index=trial_index,
        seed=_seed_label(s_alg),
        report=report,
        k=predictor.capacity,
        n=instance.n,
        premise=premise_flags(cfg, instance.n, instance.T, best),
        extras=extras,
    )


def _guarded_trial(args) -> TrialResult:
    cfg, i = args
    try:
        return run_trial(cfg, i)
    except InvariantViolation as exc:
        return TrialResult(i, _seed_label(trial_seeds(cfg.base_seed, i)[1]), None,
                           status=f"invariant: {exc}")


@dataclass
class AggregateReport:
    config: ExperimentConfig
    results: list
    mean_regret: float
    median_regret: float
    q10_regret: float
    q90_regret: float
    frac_within_delta: Optional[float]
    mean_rounds: float
    max_peak_words: int
    in_premise: bool

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.results)

    @property
    def regrets(self):
        return [r.report.regret for r in self.results if r.report is not None]

    def sem_regret(self) -> float:
        xs = self.regrets
        return statistics.stdev(xs) / math.sqrt(len(xs)) if len(xs) > 1 else 0.0


def _quantile(sorted_xs, q):
    if not sorted_xs:
        return math.nan
    return float(np.quantile(np.asarray(sorted_xs), q))


def aggregate(cfg: ExperimentConfig, results) -> AggregateReport:
    ok = [r for r in results if r.report is not None]
    regrets = sorted(r.report.regret for r in ok)
    within = None
    if cfg.delta is not None and ok:
        within = sum(x <= cfg.delta for x in regrets) / len(regrets)
    return AggregateReport(
        config=cfg,
        results=list(results),
        mean_regret=float(np.mean(regrets)) if regrets else math.nan,
        median_regret=_quantile(regrets, 0.5),
        q10_regret=_quantile(regrets, 0.1),
        q90_regret=_quantile(regrets, 0.9),
        frac_within_delta=within,
        mean_rounds=float(np.mean([r.report.rounds for r in ok])) if ok else math.nan,
        max_peak_words=max((r.report.peak_words for r in ok), default=0),
        in_premise=all(r.in_premise for r in ok),
    )


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> AggregateReport:
    """Run every trial (in worker processes when ``workers > 1``), ordered by index."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_guarded_trial, jobs))
    else:
        results = [_guarded_trial(job) for job in jobs]
    agg = aggregate(cfg, results)
    if cfg.output:
        Path(cfg.output).write_text(results_table(agg), encoding="utf-8")
    return agg


# -- tables ------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


RESULT_COLUMNS = ("trial", "seed", "algorithm", "n", "T", "k", "delta", "alg_cost", "best_cost",
                  "regret", "rounds", "peak_words", "word_ceiling", "in_premise", "status")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def results_table(agg: AggregateReport) -> str:
    cfg = agg.config
    rows = []
    for r in agg.results:
        rep = r.report
        if rep is None:
            rows.append([r.index, r.seed, cfg.algorithm, "", "", "", cfg.delta or "", "", "", "", "",
                         "", "", "", r.status])
            continue
        rows.append([r.index, r.seed, cfg.algorithm, r.n, rep.T, r.k,
                     "" if cfg.delta is None else float(cfg.delta),
                     float(rep.alg_cost), float(rep.best_cost), float(rep.regret), rep.rounds,
                     rep.peak_words, word_ceiling(r.k), r.in_premise, r.status])
    return _csv(RESULT_COLUMNS, rows)


def memory_frontier(cfg: ExperimentConfig, deltas) -> list:
    """One ``(delta, k, peak_words, mean_regret, in_premise)`` row per delta."""
    rows = []
    for d in deltas:
        agg = run_experiment(replace(cfg, delta=float(d), output=None))
        ks = {r.k for r in agg.results if r.report is not None}
        rows.append((float(d), max(ks) if ks else 0, agg.max_peak_words, agg.mean_regret, agg.in_premise))
    return rows


def frontier_table(rows) -> str:
    return _csv(("delta", "k", "peak_words", "mean_regret", "in_premise"), rows)


# -- reduction experiments -----------------------------------------------------

def reduction_trial(case: str, delta: float, trial_index: int, base_seed: int, n=32, T=2000,
                    epsilon=None):
    """One masked-reduction run with a multiplicative-weights oracle; returns a row dict."""
    params = ReductionParams(delta)
    s_stream, s_alg, s_mask = trial_seeds(base_seed, trial_index)
    X = gen_diffdist(DiffDistSpec(n, T, params.offset, case, None, s_stream))
    eps = epsilon if epsilon is not None else default_mw_epsilon(n, T)
    oracle = MultiplicativeWeights(n, eps, np.random.default_rng(s_alg), Mode.DISCRETE)
    verdict = run_reduction(oracle, X, params, np.random.default_rng(s_mask))
    truth = 1 if case.upper() == "YES" else 0
    return {
        "case": case.upper(),
        "seed": _seed_label(s_mask),
        "S": verdict.accuracy,
        "decision": verdict.decision,
        "correct": verdict.decision == truth,
        "correct_days": int(verdict.correct_days.sum()),
    }


REDUCTION_COLUMNS = ("case", "seed", "S", "decision", "correct")


def run_reduction_experiment(case, delta, trials, base_seed, n=32, T=2000, epsilon=None):
    return [reduction_trial(case, delta, i, base_seed, n, T, epsilon) for i in range(trials)]


def reduction_table(rows) -> str:
    return _csv(REDUCTION_COLUMNS, [[r[c] for c in REDUCTION_COLUMNS] for r in rows])
