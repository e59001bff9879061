"""Chain quality measurement: coverage, selective accuracy, acquisition cost.

A chain is scored by three quantities to be maximized jointly:

* coverage -- fraction of inputs the chain accepts (does not reject),
* accuracy -- fraction of accepted inputs labelled correctly (0 when
  nothing is accepted),
* inverse cost -- the cheapest mean acquisition cost in the comparison
  group divided by the chain's own mean cost, so the cheapest chain
  scores exactly 1 and everything else falls in (0, 1).

Raw mean cost is population-independent and is what gets memoized; the
inverse form is recomputed against whichever group a chain is being
compared inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .chain import StageChain, StagePlan, train_chain
from .chromosome import Chromosome

__all__ = ["ObjectiveVector", "measure", "normalize_costs", "ChainEvaluator"]


@dataclass(frozen=True)
class ObjectiveVector:
    coverage: float
    accuracy: float
    raw_cost: float
    inverse_cost: float | None = None

    def as_point(self) -> tuple[float, float, float]:
        """(coverage, accuracy, inverse_cost) triple used for ranking."""
        if self.inverse_cost is None:
            raise ValueError("inverse cost not set; normalize against a population first")
        return (self.coverage, self.accuracy, self.inverse_cost)

    def with_inverse(self, inverse_cost: float) -> "ObjectiveVector":
        return replace(self, inverse_cost=inverse_cost)


def measure(chain: StageChain, X: np.ndarray, y: np.ndarray) -> ObjectiveVector:
    """Score a trained chain on a labelled split.

    Rejected inputs count against coverage, are excluded from accuracy,
    and still contribute the full chain cost to mean acquisition cost.
    The cost mean uses exact (fsum) accumulation so any replay that sums
    the same per-record costs reproduces it bit for bit.
    """
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise ValueError("cannot measure objectives on an empty split")
    batch = chain.evaluate_batch(X)
    accepted = int(batch.accepted.sum())
    coverage = accepted / n
    if accepted == 0:
        accuracy = 0.0
    else:
        correct = int((batch.predicted[batch.accepted] == y[batch.accepted]).sum())
        accuracy = correct / accepted
    raw_cost = math.fsum(batch.incurred_cost.tolist()) / n
    return ObjectiveVector(coverage=coverage, accuracy=accuracy, raw_cost=raw_cost)


def normalize_costs(raw_costs: Sequence[float]) -> list[float]:
    """Group-minimum-over-own mean cost for each member of a group.

    The cheapest member maps to exactly 1.0; a member can only be judged
    relative to the group it is normalized within.
    """
    if len(raw_costs) == 0:
        raise ValueError("cannot normalize an empty cost list")
    for c in raw_costs:
        if not math.isfinite(c) or c <= 0:
            raise ValueError(f"raw costs must be positive and finite, got {c}")
    cheapest = min(raw_costs)
    return [cheapest / c for c in raw_costs]


# -- memoizing evaluator ------------------------------------------------------

# worker-process state for parallel evaluation (populated by _pool_init)
_POOL_EVALUATOR: "ChainEvaluator | None" = None


def _pool_init(payload) -> None:
    global _POOL_EVALUATOR
    _POOL_EVALUATOR = ChainEvaluator(*payload)


def _pool_eval(genes: tuple[int, ...]) -> ObjectiveVector:
    return _POOL_EVALUATOR.evaluate(Chromosome(genes))


class ChainEvaluator:
    """Trains chains on a fixed train split and measures them on a fixed
    evaluation split, memoizing objective vectors by canonical gene vector.

    Training and measurement are deterministic functions of the chromosome,
    so cached results are identical to recomputed ones and the cache may be
    shared across runs on the same splits.
    """

    def __init__(
        self,
        X_train: np.ndarray,
        y_train: np.ndarray,
        X_eval: np.ndarray,
        y_eval: np.ndarray,
        costs,
        threshold: float,
        lam: float = 1.0,
        workers: int = 1,
    ) -> None:
        self.X_train = np.asarray(X_train, dtype=np.float64)
        self.y_train = np.asarray(y_train)
        self.X_eval = np.asarray(X_eval, dtype=np.float64)
        self.y_eval = np.asarray(y_eval)
        self.costs = np.asarray(costs, dtype=np.float64)
        self.threshold = threshold
        self.lam = lam
        self.workers = max(1, int(workers))
        self._cache: dict[tuple[int, ...], ObjectiveVector] = {}
        self._pool = None

    @classmethod
    def from_dataset(cls, dataset, threshold, split="val", lam=1.0, workers=1):
        """Evaluator over a CostedDataset: train on its train split, measure
        on the named split ('val' for search, 'test' for final reporting)."""
        if split == "val":
            X_eval, y_eval = dataset.X_val, dataset.y_val
        elif split == "test":
            X_eval, y_eval = dataset.X_test, dataset.y_test
        elif split == "train":
            X_eval, y_eval = dataset.X_train, dataset.y_train
        else:
            raise ValueError(f"unknown evaluation split {split!r}")
        return cls(
            dataset.X_train,
            dataset.y_train,
            X_eval,
            y_eval,
            dataset.costs,
            threshold,
            lam=lam,
            workers=workers,
        )

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]

    @property
    def cache_size(self) -> int:
        return len(self._cache)

    def build_chain(self, chromosome: Chromosome) -> StageChain:
        plan = StagePlan.from_chromosome(chromosome.compress())
        return train_chain(
            plan,
            self.X_train,
            self.y_train,
            self.costs,
            threshold=self.threshold,
            lam=self.lam,
        )

    def evaluate(self, chromosome: Chromosome) -> ObjectiveVector:
        key = chromosome.compress().genes
        hit = self._cache.get(key)
        if hit is None:
            hit = measure(self.build_chain(chromosome), self.X_eval, self.y_eval)
            self._cache[key] = hit
        return hit

    def evaluate_many(self, chromosomes: Iterable[Chromosome]) -> list[ObjectiveVector]:
        """Evaluate a batch, fanning uncached work across workers if enabled.

        Results are merged into the cache in first-appearance order; since
        each evaluation is a pure function of the gene vector, parallel and
        sequential execution fill the cache with identical values.
        """
        keys = [c.compress().genes for c in chromosomes]
        missing: list[tuple[int, ...]] = []
        seen: set[tuple[int, ...]] = set()
        for key in keys:
            if key not in self._cache and key not in seen:
                missing.append(key)
                seen.add(key)
        if self.workers > 1 and len(missing) > 1:
            for key, result in zip(missing, self._pool_map(missing)):
                self._cache[key] = result
        else:
            for key in missing:
                self.evaluate(Chromosome(key))
        return [self._cache[key] for key in keys]

    def _pool_map(self, keys):
        from concurrent.futures import ProcessPoolExecutor

        if self._pool is None:
            payload = (
                self.X_train,
                self.y_train,
                self.X_eval,
                self.y_eval,
                self.costs,
                self.threshold,
                self.lam,
            )
            self._pool = ProcessPoolExecutor(
                max_workers=self.workers, initializer=_pool_init, initargs=(payload,)
            )
        return list(self._pool.map(_pool_eval, keys, chunksize=8))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
