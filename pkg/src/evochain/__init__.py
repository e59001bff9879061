"""Budgeted early-exit classifier chains evolved by multi-objective search."""

from .chain import (
    BatchEvaluation,
    EvaluationTrace,
    LogisticModel,
    StageChain,
    StagePlan,
    Standardizer,
    fit_logistic,
    train_chain,
)
from .chromosome import (
    Chromosome,
    SearchSpaceParams,
    ordered_partition_count,
    search_space_size,
)
from .data import (
    CostedDataset,
    CostSchedule,
    SyntheticSpec,
    assemble_dataset,
    generate_synthetic,
    load_dataset,
    split_50_25_25,
)
from .config import ConfigError, RunConfig, build_dataset, config_hash, load_config
from .estimator import ChainClassifier, EvolvedChainClassifier
from .evolution import GaConfig, RunResult, run
from .objectives import ChainEvaluator, ObjectiveVector, measure, normalize_costs
from .oracle import (
    EnumerationCapError,
    GlobalFront,
    enumerate_solutions,
    global_front,
    load_front,
    save_front,
    track_recovery,
)

__version__ = "0.1.0"

__all__ = [
    "BatchEvaluation",
    "ChainClassifier",
    "ChainEvaluator",
    "Chromosome",
    "ConfigError",
    "CostSchedule",
    "CostedDataset",
    "EnumerationCapError",
    "EvaluationTrace",
    "EvolvedChainClassifier",
    "GaConfig",
    "GlobalFront",
    "LogisticModel",
    "ObjectiveVector",
    "RunConfig",
    "RunResult",
    "SearchSpaceParams",
    "StageChain",
    "StagePlan",
    "Standardizer",
    "SyntheticSpec",
    "assemble_dataset",
    "build_dataset",
    "config_hash",
    "enumerate_solutions",
    "fit_logistic",
    "generate_synthetic",
    "global_front",
    "load_config",
    "load_dataset",
    "load_front",
    "measure",
    "normalize_costs",
    "ordered_partition_count",
    "run",
    "save_front",
    "search_space_size",
    "split_50_25_25",
    "track_recovery",
    "train_chain",
]
