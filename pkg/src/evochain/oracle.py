"""Exhaustive ground truth for small search spaces.

Enumerates every canonical staged plan with up to k stages exactly once,
evaluates them all through the same measurement path the search uses, and
keeps the globally non-dominated set.  Search runs can then be audited by
counting how many true front members each generation holds.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Iterator, Sequence

from .chromosome import Chromosome, search_space_size
from .evolution import RunResult, objective_norm
from .objectives import ChainEvaluator, ObjectiveVector

__all__ = [
    "DEFAULT_CAP",
    "FRONT_FORMAT_VERSION",
    "EnumerationCapError",
    "GlobalFront",
    "enumerate_solutions",
    "global_front",
    "track_recovery",
    "save_front",
    "load_front",
]

DEFAULT_CAP = 10**6
FRONT_FORMAT_VERSION = "1"


class EnumerationCapError(ValueError):
    """Raised instead of enumerating a search space larger than the cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(
            f"search space holds {size} solutions, above the enumeration cap {cap}"
        )


def _growth_strings(n: int, blocks: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length n using exactly ``blocks`` labels.

    Each string names a set partition uniquely (labels appear in order of
    first use), so no dedupe table is needed downstream.
    """
    a = [0] * n

    def rec(i: int, used: int) -> Iterator[tuple[int, ...]]:
        if i == n:
            if used == blocks:
                yield tuple(a)
            return
        if used + (n - i) < blocks:  # cannot reach the block count any more
            return
        for v in range(min(used + 1, blocks)):
            a[i] = v
            yield from rec(i + 1, used + 1 if v == used else used)

    yield from rec(1, 1)


def enumerate_solutions(
    n: int, k: int, cap: int = DEFAULT_CAP
) -> Iterator[Chromosome]:
    """Yield every canonical chromosome with 1..k stages exactly once.

    Iterates stage counts in ascending order; within a stage count, set
    partitions (as growth strings) crossed with all orderings of their
    blocks.  Refuses up front when the closed-form space size exceeds
    ``cap``.
    """
    size = search_space_size(n, k)
    if size > cap:
        raise EnumerationCapError(size, cap)
    for blocks in range(1, k + 1):
        for rgs in _growth_strings(n, blocks):
            for perm in permutations(range(blocks)):
                yield Chromosome(tuple(perm[g] for g in rgs))


@dataclass
class GlobalFront:
    """The exact non-dominated set of a fully enumerated search space."""

    n_features: int
    max_stages: int
    members: list[tuple[Chromosome, ObjectiveVector]]
    total_evaluated: int
    min_raw_cost: float

    def __len__(self) -> int:
        return len(self.members)

    def gene_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(c.genes for c, _ in self.members)


def _front_scan(
    entries: Iterable[tuple[Chromosome, ObjectiveVector]]
) -> list[tuple[Chromosome, ObjectiveVector]]:
    """Incrementally keep the non-dominated set under (coverage, accuracy,
    -raw_cost); equal triples all stay."""
    front: list[tuple[Chromosome, ObjectiveVector]] = []
    for cand, obj in entries:
        point = (obj.coverage, obj.accuracy, -obj.raw_cost)
        dominated = False
        survivors = []
        for kept, kept_obj in front:
            kp = (kept_obj.coverage, kept_obj.accuracy, -kept_obj.raw_cost)
            if all(a >= b for a, b in zip(kp, point)) and kp != point:
                dominated = True
            if not (all(a >= b for a, b in zip(point, kp)) and point != kp):
                survivors.append((kept, kept_obj))
        if not dominated:
            survivors.append((cand, obj))
            front = survivors
        # if candidate is dominated the front is unchanged
    return front


def global_front(
    evaluator: ChainEvaluator, n: int, k: int, cap: int = DEFAULT_CAP
) -> GlobalFront:
    """Evaluate the entire space and extract the exact Pareto front.

    Domination uses raw mean cost directly (minimized); dividing through
    by the global minimum cost is order-preserving, so the stored inverse
    costs describe the same front.
    """
    total = 0
    min_raw = float("inf")
    entries = []
    for chromosome in enumerate_solutions(n, k, cap):
        obj = evaluator.evaluate(chromosome)
        entries.append((chromosome, obj))
        min_raw = min(min_raw, obj.raw_cost)
        total += 1
    members = _front_scan(entries)
    members = [(c, o.with_inverse(min_raw / o.raw_cost)) for c, o in members]
    members.sort(key=lambda pair: (-objective_norm(pair[1].as_point()), pair[0].genes))
    return GlobalFront(
        n_features=n,
        max_stages=k,
        members=members,
        total_evaluated=total,
        min_raw_cost=min_raw,
    )


def track_recovery(result: RunResult, front: GlobalFront) -> list[int]:
    """Per-generation count of distinct true-front members in the population."""
    target = front.gene_set()
    return [len(set(generation) & target) for generation in result.generation_members]


# -- front files --------------------------------------------------------------

_COLUMNS = ("chromosome", "coverage", "accuracy", "raw_cost", "inverse_cost", "rank", "fitness")


def save_front(
    path,
    members: Sequence[tuple[Chromosome, ObjectiveVector]],
    config_hash: str = "-",
    ranks: Sequence[int] | None = None,
    fitness: Sequence[float] | None = None,
) -> None:
    """Write a front as line-delimited records with a tagged header.

    Objectives must carry their inverse cost.  When rank/fitness are not
    given (oracle fronts), every member gets rank 0 and its aggregate
    score as fitness.  Floats are written in shortest round-trip form so
    identical fronts produce byte-identical files.
    """
    lines = [
        f"# evochain-front v{FRONT_FORMAT_VERSION} config={config_hash}",
        ",".join(_COLUMNS),
    ]
    for i, (chromosome, obj) in enumerate(members):
        rank = 0 if ranks is None else ranks[i]
        fit = objective_norm(obj.as_point()) if fitness is None else fitness[i]
        lines.append(
            ",".join(
                [
                    str(chromosome),
                    repr(float(obj.coverage)),
                    repr(float(obj.accuracy)),
                    repr(float(obj.raw_cost)),
                    repr(float(obj.inverse_cost)),
                    str(int(rank)),
                    repr(float(fit)),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class LoadedFront:
    """Parsed front file: header metadata plus one entry per member."""

    format_version: str
    config_hash: str
    entries: list[tuple[Chromosome, ObjectiveVector, int, float]]

    def gene_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(c.genes for c, _, _, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def load_front(path) -> LoadedFront:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("# evochain-front"):
        raise ValueError(f"{path}: not a front file (missing tagged header)")
    header = lines[0].split()
    version = header[2].lstrip("v") if len(header) > 2 else "?"
    config_hash = "-"
    for token in header[2:]:
        if token.startswith("config="):
            config_hash = token.split("=", 1)[1]
    if lines[1].split(",") != list(_COLUMNS):
        raise ValueError(f"{path}: unexpected column header {lines[1]!r}")
    entries = []
    for line in lines[2:]:
        parts = line.split(",")
        if len(parts) != len(_COLUMNS):
            raise ValueError(f"{path}: malformed record {line!r}")
        chromosome = Chromosome.from_string(parts[0])
        obj = ObjectiveVector(
            coverage=float(parts[1]),
            accuracy=float(parts[2]),
            raw_cost=float(parts[3]),
            inverse_cost=float(parts[4]),
        )
        entries.append((chromosome, obj, int(parts[5]), float(parts[6])))
    return LoadedFront(format_version=version, config_hash=config_hash, entries=entries)
