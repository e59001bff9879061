"""Multi-objective genetic search over staged feature-acquisition plans.

Selection pressure combines Pareto rank with an L2 aggregate of the
objective triple: fronts are peeled iteratively, the outermost
(non-dominated) front receives the largest rank value, and fitness is
gamma**rank times the aggregate score with gamma chosen each generation
so that any member of a better front strictly out-scores every member of
a worse one.  Elites -- the top unique solutions by fitness, always
covering the whole non-dominated front -- pass to the next generation
unchanged; the remainder is bred by roulette-wheel selection, a
stage-count-aware uniform crossover, and a beta-binomial stage-resampling
mutation that can append a new stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .chromosome import Chromosome
from .objectives import ChainEvaluator, ObjectiveVector, normalize_costs

__all__ = [
    "GaConfig",
    "RankedPopulation",
    "GenerationStats",
    "RunResult",
    "round_half_away",
    "dominates",
    "pareto_rank",
    "objective_norm",
    "fitness_scores",
    "rank_population",
    "select_pair",
    "elite_count",
    "adjust_population_size",
    "stage_resample_pmf",
    "new_stage_probability",
    "stage_increase_probability",
    "mutate",
    "recombine",
    "init_population",
    "run",
]


def round_half_away(x: float) -> int:
    """Round with .5 going away from zero (2.5 -> 3), unlike banker's rounding."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


@dataclass
class GaConfig:
    """Search parameters.

    ``mutation_rate`` defaults to 1/n_features and ``max_stages`` to
    min(round(n/2), 10) (floored at 2, since the initial population is
    built from two-stage plans); both are resolved against the dataset
    when a run starts.  ``inc`` grows the population whenever the elite
    set fills it entirely and shrinks it back once pressure eases.  A run
    halts at ``max_iter`` generations, or when the top-fitness chromosome
    has stayed the same through ``stall_generations`` successive
    generations, or -- with inc=0 -- when every member of the population
    is a distinct non-dominated solution.
    """

    population_size: int = 300
    max_iter: int = 150
    mutation_rate: float | None = None
    crossover_rate: float = 0.8
    elitism_fraction: float = 0.2
    mutation_bias: float = 2.0
    epsilon: float = 0.01
    inc: int = 0
    stall_generations: int = 20
    max_stages: int | None = None
    rng_seed: int = 0

    def resolved(self, n_features: int) -> "GaConfig":
        """Fill data-dependent defaults and validate against n_features."""
        if n_features < 2:
            raise ValueError("search needs at least two features (no two-stage plan exists)")
        rate = self.mutation_rate if self.mutation_rate is not None else 1.0 / n_features
        stages = self.max_stages
        if stages is None:
            stages = max(2, min(round_half_away(n_features / 2), 10))
        cfg = replace(self, mutation_rate=rate, max_stages=stages)
        if cfg.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {cfg.population_size}")
        if cfg.max_iter < 0:
            raise ValueError(f"max_iter must be >= 0, got {cfg.max_iter}")
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"mutation_rate must lie in [0, 1], got {rate}")
        if not 0.0 <= cfg.crossover_rate <= 1.0:
            raise ValueError(f"crossover_rate must lie in [0, 1], got {cfg.crossover_rate}")
        if not 0.0 <= cfg.elitism_fraction <= 1.0:
            raise ValueError(f"elitism_fraction must lie in [0, 1], got {cfg.elitism_fraction}")
        if cfg.mutation_bias <= 1.0:
            raise ValueError(f"mutation_bias must be > 1, got {cfg.mutation_bias}")
        if cfg.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {cfg.epsilon}")
        if cfg.inc < 0:
            raise ValueError(f"inc must be >= 0, got {cfg.inc}")
        if cfg.stall_generations < 1:
            raise ValueError(f"stall_generations must be >= 1, got {cfg.stall_generations}")
        if not 2 <= cfg.max_stages <= n_features:
            raise ValueError(
                f"max_stages must lie in [2, n_features={n_features}], got {cfg.max_stages}"
            )
        return cfg


# -- ranking and fitness ------------------------------------------------------


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True if a is at least as good as b everywhere and better somewhere."""
    ge = all(x >= y for x, y in zip(a, b))
    gt = any(x > y for x, y in zip(a, b))
    return ge and gt


def pareto_rank(points: Sequence[Sequence[float]]) -> list[int]:
    """Iteratively peel non-dominated fronts and rank them.

    The outermost front gets the largest rank value (the number of fronts
    behind it) and the innermost gets 0, so larger rank means closer to
    the Pareto front.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError(f"need a non-empty 2-d array of points, got shape {pts.shape}")
    n = len(pts)
    ge = (pts[:, None, :] >= pts[None, :, :]).all(axis=-1)
    gt = (pts[:, None, :] > pts[None, :, :]).any(axis=-1)
    dom = ge & gt  # dom[i, j]: i dominates j
    level = np.full(n, -1)
    alive = np.ones(n, dtype=bool)
    t = 0
    while alive.any():
        idx = np.flatnonzero(alive)
        sub = dom[np.ix_(idx, idx)]
        front = idx[~sub.any(axis=0)]
        level[front] = t
        alive[front] = False
        t += 1
    t_star = t - 1
    return [int(t_star - lv) for lv in level]


def objective_norm(point: Sequence[float]) -> float:
    """L2 aggregate of an objective triple."""
    return math.sqrt(math.fsum(v * v for v in point))


@dataclass
class RankedPopulation:
    """A generation with normalized costs, ranks, and fitness attached."""

    chromosomes: list[Chromosome]
    objectives: list[ObjectiveVector]  # inverse_cost filled against this population
    ranks: list[int]
    scores: list[float]
    fitness: list[float]
    gamma: float
    t_star: int

    def __len__(self) -> int:
        return len(self.chromosomes)

    def fitness_order(self) -> list[int]:
        """Indices from best to worst fitness; ties break on gene vector."""
        return sorted(
            range(len(self.chromosomes)),
            key=lambda i: (-self.fitness[i], self.chromosomes[i].genes),
        )


def fitness_scores(
    points: Sequence[Sequence[float]], epsilon: float = 0.01
) -> tuple[list[int], list[float], float, list[float]]:
    """Rank objective points and convert them to scalar fitness.

    gamma = (max score / min score) + epsilon guarantees that fitness
    orders strictly by rank first: any member of a better front beats
    every member of a worse one regardless of raw scores.  Returns
    (ranks, scores, gamma, fitness).
    """
    ranks = pareto_rank(points)
    scores = [objective_norm(p) for p in points]
    low = min(scores)
    if low <= 0.0:
        raise ValueError("aggregate scores must be positive (cost objective is > 0)")
    gamma = max(scores) / low + epsilon
    fitness = [gamma**r * s for r, s in zip(ranks, scores)]
    return ranks, scores, gamma, fitness


def rank_population(
    chromosomes: Sequence[Chromosome],
    raw_objectives: Sequence[ObjectiveVector],
    epsilon: float = 0.01,
) -> RankedPopulation:
    """Normalize costs within the population, rank, and score fitness."""
    if len(chromosomes) != len(raw_objectives):
        raise ValueError("one objective vector per chromosome required")
    inverses = normalize_costs([o.raw_cost for o in raw_objectives])
    objectives = [o.with_inverse(v) for o, v in zip(raw_objectives, inverses)]
    points = [o.as_point() for o in objectives]
    ranks, scores, gamma, fitness = fitness_scores(points, epsilon)
    return RankedPopulation(
        chromosomes=list(chromosomes),
        objectives=objectives,
        ranks=ranks,
        scores=scores,
        fitness=fitness,
        gamma=gamma,
        t_star=max(ranks),
    )


def select_pair(ranked: RankedPopulation, rng: np.random.Generator) -> tuple[int, int]:
    """Roulette-wheel draw of two parents (independent draws; repeats allowed)."""
    weights = np.asarray(ranked.fitness, dtype=np.float64)
    probs = weights / weights.sum()
    i, j = rng.choice(len(probs), size=2, replace=True, p=probs)
    return int(i), int(j)


def elite_count(n_unique: int, elitism_fraction: float, n_front_unique: int) -> int:
    """Elites to carry over: the elitism share of the unique population,
    but never fewer than the whole unique non-dominated front."""
    return max(round_half_away(elitism_fraction * n_unique), n_front_unique)


def adjust_population_size(elite_size: int, target_size: int, inc: int, base_size: int) -> int:
    """Population-size feedback applied once per generation.

    Grow by ``inc`` when elites fill the entire population (selection
    pressure exhausted); shrink by ``inc`` once the elite set sits clearly
    below the inflated size, but never below the configured base size.
    """
    if elite_size == target_size:
        target_size += inc
    if elite_size < target_size - inc and target_size > base_size:
        target_size -= inc
    return target_size


# -- variation operators ------------------------------------------------------


@lru_cache(maxsize=None)
def stage_resample_pmf(stage_count: int, bias: float) -> np.ndarray:
    """Beta-binomial stage-resampling distribution over {0, ..., stage_count}.

    pmf(j) = C(S, j) * B(j + 1, S - j + bias) / B(1, bias) for S = stage_count;
    drawing j == S creates a new stage.  The mean is S / (bias + 1), so
    bias > 1 pulls resampled genes toward the cheap early stages.
    """
    if stage_count < 1:
        raise ValueError(f"stage_count must be >= 1, got {stage_count}")
    if bias <= 1.0:
        raise ValueError(f"bias must be > 1, got {bias}")
    s = stage_count
    log_denom = math.lgamma(s + 1 + bias)
    pmf = np.array(
        [
            math.comb(s, j)
            * bias
            * math.exp(math.lgamma(j + 1) + math.lgamma(s - j + bias) - log_denom)
            for j in range(s + 1)
        ]
    )
    pmf.setflags(write=False)
    return pmf


def new_stage_probability(stage_count: int, bias: float) -> float:
    """Mass the resampling PMF puts on opening a new stage (j == stage_count)."""
    return float(stage_resample_pmf(stage_count, bias)[stage_count])


def stage_increase_probability(
    stage_count: int, bias: float, mutation_rate: float, n_features: int
) -> float:
    """Chance that at least one gene of a mutated chromosome lands in a new
    stage: 1 - (1 - rate * p_new)**n_features."""
    p_new = new_stage_probability(stage_count, bias)
    return 1.0 - (1.0 - mutation_rate * p_new) ** n_features


def _mutate_genes(
    genes: tuple[int, ...],
    mutation_rate: float,
    bias: float,
    rng: np.random.Generator,
    max_stages: int | None = None,
) -> tuple[int, ...]:
    """Per-gene resampling on a canonical gene vector, before compression."""
    stage_count = max(genes) + 1
    pmf = stage_resample_pmf(stage_count, bias)
    if max_stages is not None and stage_count >= max_stages:
        # at the stage cap: condition the draw on not opening a new stage
        pmf = pmf[:stage_count] / pmf[:stage_count].sum()
        support = stage_count
    else:
        support = stage_count + 1
    out = np.array(genes)
    hit = rng.random(len(out)) < mutation_rate
    n_hit = int(hit.sum())
    if n_hit:
        out[hit] = rng.choice(support, size=n_hit, p=pmf)
    return tuple(int(g) for g in out)


def mutate(
    chromosome: Chromosome,
    mutation_rate: float,
    bias: float,
    rng: np.random.Generator,
    max_stages: int | None = None,
) -> Chromosome:
    """Resample each gene with probability ``mutation_rate`` and compress."""
    canonical = chromosome.compress()
    raw = _mutate_genes(canonical.genes, mutation_rate, bias, rng, max_stages)
    return Chromosome(raw).compress()


def recombine(
    parent_a: Chromosome,
    parent_b: Chromosome,
    crossover_rate: float,
    rng: np.random.Generator,
) -> Chromosome:
    """Stage-count-aware uniform crossover.

    With probability 1 - crossover_rate one parent is returned unchanged
    (fair coin).  Otherwise the child's stage count is drawn uniformly
    from {|A|, |B|, round((|A|+|B|)/2)}, and each gene comes from a
    fair-coin parent with its stage index rescaled into the child's range:
    s' = round(((s + 1) / |parent|) * |child|) - 1, clamped to a valid
    stage.  Rounding is half-away-from-zero, done in exact integer
    arithmetic.  The child is compressed before return.
    """
    if parent_a.n_features != parent_b.n_features:
        raise ValueError("parents must describe the same feature set")
    if rng.random() >= crossover_rate:
        return parent_a if rng.random() < 0.5 else parent_b
    size_a, size_b = parent_a.stage_count, parent_b.stage_count
    options = (size_a, size_b, (size_a + size_b + 1) // 2)
    child_stages = options[int(rng.integers(3))]
    from_a = rng.random(parent_a.n_features) < 0.5
    genes = []
    for i in range(parent_a.n_features):
        src = parent_a.genes[i] if from_a[i] else parent_b.genes[i]
        src_stages = size_a if from_a[i] else size_b
        # round_half_away(((src+1)/src_stages) * child_stages) - 1, exactly
        mapped = (2 * (src + 1) * child_stages + src_stages) // (2 * src_stages) - 1
        genes.append(min(max(mapped, 0), child_stages - 1))
    return Chromosome(tuple(genes)).compress()


def init_population(
    n_features: int,
    population_size: int,
    mutation_rate: float,
    bias: float,
    rng: np.random.Generator,
) -> list[Chromosome]:
    """Seed the population by mutating the one-stage plan until it splits.

    Every draw resamples genes of the all-zero vector, retrying until at
    least one gene moves, so the whole initial population consists of
    two-stage plans.
    """
    if n_features < 2:
        raise ValueError("cannot build a two-stage initial population from one feature")
    if mutation_rate <= 0.0:
        raise ValueError("mutation_rate must be positive to split the one-stage plan")
    base = (0,) * n_features
    population: list[Chromosome] = []
    for _ in range(population_size):
        for _ in range(100_000):
            raw = _mutate_genes(base, mutation_rate, bias, rng)
            if any(raw):
                break
        else:
            raise ValueError(
                "mutation never split the one-stage plan; mutation_rate is too small"
            )
        population.append(Chromosome(raw).compress())
    return population


# -- main loop ----------------------------------------------------------------


@dataclass
class GenerationStats:
    """Bookkeeping for one ranked generation."""

    index: int
    population_size: int
    target_size: int
    unique_count: int
    front_unique_count: int
    elite_size: int
    best_genes: tuple[int, ...]
    best_fitness: float


@dataclass
class RunResult:
    """Outcome of a search run.

    ``front`` is the unique non-dominated set of the final generation in
    fitness order; ``generation_members`` records the distinct canonical
    gene vectors present in every generation (including the initial one)
    for recovery analysis.
    """

    front: list[tuple[Chromosome, ObjectiveVector]]
    generations: list[GenerationStats]
    generation_members: list[tuple[tuple[int, ...], ...]]
    halt_reason: str
    final: RankedPopulation

    @property
    def n_generations(self) -> int:
        return len(self.generation_members)

    def best(self) -> tuple[Chromosome, ObjectiveVector]:
        return self.front[0]


def _unique_genes(population: Sequence[Chromosome]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted({c.genes for c in population}))


def _rank_generation(
    population: list[Chromosome], evaluator: ChainEvaluator, epsilon: float
) -> RankedPopulation:
    raw = evaluator.evaluate_many(population)
    return rank_population(population, raw, epsilon)


def run(
    config: GaConfig, evaluator: ChainEvaluator, rng: np.random.Generator | None = None
) -> RunResult:
    """Evolve staged plans against an evaluator; see GaConfig for halting."""
    cfg = config.resolved(evaluator.n_features)
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    population = init_population(
        evaluator.n_features, cfg.population_size, cfg.mutation_rate, cfg.mutation_bias, rng
    )
    target_size = cfg.population_size
    members_log = [_unique_genes(population)]
    stats: list[GenerationStats] = []
    best_history: list[tuple[int, ...]] = []
    prev_front_unique: int | None = None
    halt_reason = ""
    h = 0
    while True:
        if h >= cfg.max_iter:
            halt_reason = "max_iter"
            break
        window = cfg.stall_generations + 1
        if len(best_history) >= window and len(set(best_history[-window:])) == 1:
            halt_reason = "stalled"
            break
        if cfg.inc == 0 and prev_front_unique == target_size:
            halt_reason = "front_filled"
            break

        ranked = _rank_generation(population, evaluator, cfg.epsilon)
        order = ranked.fitness_order()
        unique_order: list[int] = []
        seen: set[tuple[int, ...]] = set()
        for i in order:
            genes = population[i].genes
            if genes not in seen:
                seen.add(genes)
                unique_order.append(i)
        front_unique = len(
            {population[i].genes for i in range(len(population)) if ranked.ranks[i] == ranked.t_star}
        )
        n_elite = elite_count(len(unique_order), cfg.elitism_fraction, front_unique)
        stats.append(
            GenerationStats(
                index=h,
                population_size=len(population),
                target_size=target_size,
                unique_count=len(unique_order),
                front_unique_count=front_unique,
                elite_size=n_elite,
                best_genes=population[order[0]].genes,
                best_fitness=ranked.fitness[order[0]],
            )
        )
        best_history.append(population[order[0]].genes)

        target_size = adjust_population_size(n_elite, target_size, cfg.inc, cfg.population_size)

        next_population = [population[i] for i in unique_order[:n_elite]]
        while len(next_population) < target_size:
            ia, ib = select_pair(ranked, rng)
            child = recombine(population[ia], population[ib], cfg.crossover_rate, rng)
            child = mutate(child, cfg.mutation_rate, cfg.mutation_bias, rng, cfg.max_stages)
            next_population.append(child)

        population = next_population
        members_log.append(_unique_genes(population))
        prev_front_unique = front_unique
        h += 1

    final = _rank_generation(population, evaluator, cfg.epsilon)
    order = final.fitness_order()
    front: list[tuple[Chromosome, ObjectiveVector]] = []
    seen_front: set[tuple[int, ...]] = set()
    for i in order:
        if final.ranks[i] != final.t_star:
            continue
        genes = final.chromosomes[i].genes
        if genes in seen_front:
            continue
        seen_front.add(genes)
        front.append((final.chromosomes[i], final.objectives[i]))
    stats.append(
        GenerationStats(
            index=h,
            population_size=len(population),
            target_size=target_size,
            unique_count=len({c.genes for c in population}),
            front_unique_count=len(seen_front),
            elite_size=0,
            best_genes=final.chromosomes[order[0]].genes,
            best_fitness=final.fitness[order[0]],
        )
    )
    return RunResult(
        front=front,
        generations=stats,
        generation_members=members_log,
        halt_reason=halt_reason,
        final=final,
    )
