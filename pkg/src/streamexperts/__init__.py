"""Memory-bounded prediction with expert advice: pool algorithms, baselines and experiments."""

from .core import (
    CostModel,
    Instance,
    MemoryMeter,
    Mode,
    Predictor,
    ProtocolError,
    TrialReport,
    best_expert_cost,
    drive,
    read_instance,
    regret_of,
    write_instance,
)
from .baselines import FollowPerturbedLeader, MultiplicativeWeights, mw_expected_cost
from .pooled_adversarial import PooledMajority, PooledSequential, naive_eliminator
from .pooled_random_order import EstimatedPooledRandomOrder, PooledRandomOrder, estimate_M_run
from .reduction import ReductionParams, run_reduction

__version__ = "0.1.0"

__all__ = [
    "CostModel", "Instance", "MemoryMeter", "Mode", "Predictor", "ProtocolError", "TrialReport",
    "best_expert_cost", "drive", "read_instance", "regret_of", "write_instance",
    "FollowPerturbedLeader", "MultiplicativeWeights", "mw_expected_cost",
    "PooledMajority", "PooledSequential", "naive_eliminator",
    "EstimatedPooledRandomOrder", "PooledRandomOrder", "estimate_M_run",
    "ReductionParams", "run_reduction",
]
