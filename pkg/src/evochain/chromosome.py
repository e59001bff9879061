"""Genotype for staged feature acquisition plans.

A chromosome assigns every feature to a stage of a sequential classifier
chain: gene ``i`` holds the zero-indexed stage of feature ``i``.  A gene
vector therefore encodes an ordered partition of the feature indices once
it is gap-free (every stage label below the maximum is used).  Compression
renumbers an arbitrary gene vector into that canonical form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Chromosome",
    "SearchSpaceParams",
    "ordered_partition_count",
    "search_space_size",
]


@dataclass(frozen=True)
class Chromosome:
    """Immutable stage-assignment vector.

    genes[i] is the stage index of feature i; stages are zero-indexed and
    a chain with ``stage_count`` stages uses labels 0 .. stage_count - 1.
    """

    genes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.genes) == 0:
            raise ValueError("chromosome must have at least one gene")
        for g in self.genes:
            if not isinstance(g, int) or isinstance(g, bool):
                raise ValueError(f"gene values must be ints, got {g!r}")
            if g < 0:
                raise ValueError(f"gene values must be non-negative, got {g}")

    @property
    def n_features(self) -> int:
        return len(self.genes)

    @property
    def stage_count(self) -> int:
        """Number of stages implied by the largest gene (max + 1)."""
        return max(self.genes) + 1

    def has_gaps(self) -> bool:
        """True if some stage label below the maximum is unused."""
        return len(set(self.genes)) != self.stage_count

    def is_canonical(self) -> bool:
        return not self.has_gaps()

    def compress(self) -> "Chromosome":
        """Renumber stages into canonical gap-free form.

        The distinct stage labels are relabelled 0, 1, ... in ascending
        order of their original value, which preserves the relative order
        of the stages: (3, 1, 3) -> (1, 0, 1) and (0, 0, 2, 3) ->
        (0, 0, 1, 2).  Canonical chromosomes are returned unchanged
        (compression is idempotent).
        """
        relabel = {s: i for i, s in enumerate(sorted(set(self.genes)))}
        return Chromosome(tuple(relabel[g] for g in self.genes))

    def stage_feature_sets(self) -> tuple[tuple[int, ...], ...]:
        """Feature indices grouped by stage, for canonical chromosomes."""
        if self.has_gaps():
            raise ValueError(f"chromosome {self.genes} has gaps; compress first")
        stages: list[list[int]] = [[] for _ in range(self.stage_count)]
        for feature, stage in enumerate(self.genes):
            stages[stage].append(feature)
        return tuple(tuple(s) for s in stages)

    def __str__(self) -> str:
        return "-".join(str(g) for g in self.genes)

    @classmethod
    def from_string(cls, text: str) -> "Chromosome":
        """Parse the dash-joined gene format produced by ``str()``."""
        try:
            genes = tuple(int(part) for part in text.strip().split("-"))
        except ValueError as exc:
            raise ValueError(f"malformed chromosome string {text!r}") from exc
        return cls(genes)

    @classmethod
    def single_stage(cls, n_features: int) -> "Chromosome":
        return cls((0,) * n_features)


@dataclass(frozen=True)
class SearchSpaceParams:
    """Problem dimensions: n features, at most k stages."""

    n_features: int
    max_stages: int

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        if not 1 <= self.max_stages <= self.n_features:
            raise ValueError(
                f"max_stages must lie in [1, n_features={self.n_features}], "
                f"got {self.max_stages}"
            )


def ordered_partition_count(n: int, k: int) -> int:
    """Exact number of ways to split n features into k non-empty ordered stages.

    This is k! times the Stirling number of the second kind, expanded by
    inclusion-exclusion as sum_{i=0}^{k} (-1)^(k-i) C(k, i) i^n.  Python
    integers keep the result exact at any size.
    """
    SearchSpaceParams(n, k)
    return sum((-1) ** (k - i) * math.comb(k, i) * i**n for i in range(k + 1))


def search_space_size(n: int, k: int) -> int:
    """Exact number of staged plans using anywhere from 1 to k stages."""
    SearchSpaceParams(n, k)
    return sum(ordered_partition_count(n, j) for j in range(1, k + 1))
