"""Release gate: eight end-to-end checks across the whole stack.

Each test_criterion_<N> function is one shipping criterion; conftest.py
prints a PASS/FAIL line per criterion in the terminal summary.  The two
shared instances are deliberately seeded so every number here is
reproducible: a 6-feature problem small enough to enumerate exactly, and
a 15-feature problem with an uneven cost vector summing to 91.
"""

import math
import time
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from evochain.chain import EvaluationTrace, StageChain, StagePlan, train_chain
from evochain.chromosome import Chromosome, search_space_size
from evochain.data import SyntheticSpec, assemble_dataset, generate_synthetic
from evochain.evolution import (
    GaConfig,
    _mutate_genes,
    adjust_population_size,
    fitness_scores,
    run,
    stage_increase_probability,
    stage_resample_pmf,
)
from evochain.objectives import ChainEvaluator, ObjectiveVector, measure
from evochain.oracle import enumerate_solutions, global_front, track_recovery

DESK_COSTS = (1.0, 2.0, 3.0, 5.0, 8.0, 13.0)
WIDE_COSTS = (6, 8, 4, 8, 8, 1, 9, 10, 6, 1, 9, 9, 4, 1, 7)


@pytest.fixture(scope="module")
def desk():
    """600 records, 6 features, 3-stage cap: a 603-solution space whose
    exact front the search is expected to rediscover."""
    spec = SyntheticSpec(n_features=6, n_informative=4, n_records=600,
                         class_sep=4.0, label_noise=0.02, seed=3)
    X, y = generate_synthetic(spec)
    dataset = assemble_dataset(X, y, DESK_COSTS, split_seed=0)
    evaluator = ChainEvaluator.from_dataset(dataset, 0.65, split="val")
    return SimpleNamespace(dataset=dataset, evaluator=evaluator, threshold=0.65)


@pytest.fixture(scope="module")
def wide():
    """8000 records, 15 features (12 informative), 2% label noise, strict
    0.85 acceptance threshold: the cost-pressure showcase instance."""
    spec = SyntheticSpec(n_features=15, n_informative=12, n_records=8000,
                         n_classes=2, clusters_per_class=2, class_sep=0.85,
                         label_noise=0.02, seed=0)
    X, y = generate_synthetic(spec)
    dataset = assemble_dataset(X, y, WIDE_COSTS, split_seed=0)
    return SimpleNamespace(
        dataset=dataset,
        search_eval=ChainEvaluator.from_dataset(dataset, 0.85, split="val"),
        report_eval=ChainEvaluator.from_dataset(dataset, 0.85, split="test"),
    )


def test_criterion_1_counting():
    t0 = time.perf_counter()
    for n in range(1, 9):
        for k in range(1, min(n, 4) + 1):
            enumerated = sum(1 for _ in enumerate_solutions(n, k))
            assert search_space_size(n, k) == enumerated, (n, k)
    assert time.perf_counter() - t0 < 1.0
    # almost every 30-gene vector over three stage labels is already
    # canonical, so the closed form must sit just below 3^30
    ratio = Fraction(search_space_size(30, 3), 3**30)
    assert Fraction(99, 100) <= ratio <= Fraction(1)


def test_criterion_2_mutation_law():
    stage_grid = range(1, 7)
    bias_grid = (1.5, 2.0, 2.5, 3.0)

    # closed form: unit mass and mean stage_count / (bias + 1)
    for stages in stage_grid:
        for bias in bias_grid:
            pmf = stage_resample_pmf(stages, bias)
            assert abs(pmf.sum() - 1.0) < 1e-9
            mean = float(np.arange(stages + 1) @ pmf)
            assert abs(mean - stages / (bias + 1)) < 1e-9

    # Monte Carlo: one million resampling draws per combination, every
    # frequency within three binomial standard deviations of the law
    for stages in stage_grid:
        for bias in bias_grid:
            pmf = stage_resample_pmf(stages, bias)
            rng = np.random.default_rng(20260800 + 100 * stages + int(10 * bias))
            genes = tuple(i % stages for i in range(10_000))
            counts = np.zeros(stages + 1)
            for _ in range(100):
                counts += np.bincount(
                    _mutate_genes(genes, 1.0, bias, rng), minlength=stages + 1
                )
            freq = counts / 1e6
            sigma = np.sqrt(pmf * (1.0 - pmf) / 1e6)
            assert np.all(np.abs(freq - pmf) <= 3.0 * sigma), (stages, bias)

    # chance that a mutation pass opens a new stage: formula vs simulation
    # on a 15-gene chromosome at a 10% per-gene rate
    trials = 20_000
    for stages in (1, 2, 3):
        genes = tuple(i % stages for i in range(15))
        for bias in (1.5, 2.0, 2.5, 3.0, 3.5, 4.0):
            p = stage_increase_probability(stages, bias, 0.10, 15)
            rng = np.random.default_rng(20267800 + 100 * stages + int(10 * bias))
            hits = sum(
                stages in _mutate_genes(genes, 0.10, bias, rng)
                for _ in range(trials)
            )
            sigma = math.sqrt(p * (1.0 - p) / trials)
            assert abs(hits / trials - p) <= 3.0 * sigma, (stages, bias)


def test_criterion_3_fitness_ordering():
    rng = np.random.default_rng(31)
    t0 = time.perf_counter()
    for _ in range(1000):
        size = int(rng.integers(2, 201))
        points = [tuple(1.0 - rng.random(3)) for _ in range(size)]
        ranks, scores, _, fitness = fitness_scores(points, 0.01)
        r = np.asarray(ranks)
        e = np.asarray(scores)
        f = np.asarray(fitness)
        assert np.all(np.isfinite(f))
        df = f[:, None] - f[None, :]
        dr = r[:, None] - r[None, :]
        # cross-rank: a better front strictly outranks a worse one
        assert np.all(df[dr > 0] > 0)
        # within a front, fitness orders exactly as the aggregate score
        same = dr == 0
        np.fill_diagonal(same, False)
        de = e[:, None] - e[None, :]
        assert np.all(np.sign(df[same]) == np.sign(de[same]))
    assert time.perf_counter() - t0 < 10.0


def test_criterion_4_front_recovery(desk):
    t0 = time.perf_counter()
    front = global_front(desk.evaluator, 6, 3)
    assert front.total_evaluated == 603
    traces = []
    for seed in range(50):
        cfg = GaConfig(population_size=50, max_iter=100, max_stages=3,
                       rng_seed=seed)
        trace = track_recovery(run(cfg, desk.evaluator), front)
        # (a) found front members are elites: counts never drop
        assert all(b >= a for a, b in zip(trace, trace[1:]))
        traces.append(trace)
    # (b) nearly every run rediscovers the entire exact front
    full = sum(t[-1] == len(front) for t in traces)
    assert full >= 45
    # (c) the mean recovery curve is non-decreasing as well
    length = max(len(t) for t in traces)
    padded = [t + [t[-1]] * (length - len(t)) for t in traces]
    curve = [float(np.mean([p[h] for p in padded])) for h in range(length)]
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert time.perf_counter() - t0 < 600.0


def test_criterion_5_measurement_consistency(desk):
    ds = desk.dataset
    rng = np.random.default_rng(5)
    for _ in range(100):
        chromosome = Chromosome(tuple(rng.integers(0, 3, size=6).tolist())).compress()
        via_evaluator = desk.evaluator.evaluate(chromosome)

        chain = train_chain(
            StagePlan.from_chromosome(chromosome),
            ds.X_train, ds.y_train, ds.costs, threshold=desk.threshold,
        )
        accepted = correct = 0
        spent = []
        for x, label in zip(ds.X_val, ds.y_val):
            trace = chain.evaluate(x)
            spent.append(trace.incurred_cost)
            if trace.accepted:
                accepted += 1
                correct += trace.predicted_label == label
        n = len(ds.y_val)
        assert via_evaluator.coverage == accepted / n
        assert via_evaluator.accuracy == (correct / accepted if accepted else 0.0)
        assert via_evaluator.raw_cost == math.fsum(spent) / n


def test_criterion_6_population_resizing():
    # one feedback step per generation: grow when elites fill the whole
    # population, shrink once they sit clearly below it, floor at the base
    assert adjust_population_size(50, 50, 3, 50) == 53
    assert adjust_population_size(53, 53, 3, 50) == 56
    assert adjust_population_size(49, 56, 3, 50) == 53
    assert adjust_population_size(45, 53, 3, 50) == 50
    assert adjust_population_size(40, 50, 3, 50) == 50
    assert adjust_population_size(51, 53, 3, 50) == 53
    assert adjust_population_size(12, 12, 0, 12) == 12

    # in the loop: map every canonical plan to a distinct point on an
    # anti-diagonal so each population is entirely unique non-dominated
    # elites and the grow branch keeps firing
    index = {c.genes: i for i, c in enumerate(enumerate_solutions(4, 4))}
    span = len(index)

    class AntiDiagonalEvaluator:
        n_features = 4

        def evaluate_many(self, chromosomes):
            out = []
            for c in chromosomes:
                x = (index[c.compress().genes] + 1) / (span + 1)
                out.append(ObjectiveVector(x, 1.0 - x, raw_cost=2.0))
            return out

    grown = run(
        GaConfig(population_size=6, max_iter=6, inc=3, max_stages=4, rng_seed=0),
        AntiDiagonalEvaluator(),
    )
    assert len(grown.final.chromosomes) > 6
    assert (len(grown.final.chromosomes) - 6) % 3 == 0

    steady = run(
        GaConfig(population_size=6, max_iter=6, inc=0, max_stages=4, rng_seed=0),
        AntiDiagonalEvaluator(),
    )
    assert len(steady.final.chromosomes) == 6


class _FixedModel:
    """Answers every input with the same two-class probability split."""

    def __init__(self, confidence):
        self.probs = np.array([confidence, 1.0 - confidence])
        self.classes_ = np.arange(2)

    def predict_proba(self, X):
        return np.tile(self.probs, (len(X), 1))


def _stub_chain(confidences, costs, threshold):
    n = len(confidences)
    plan = StagePlan(stages=tuple((i,) for i in range(n)), n_features=n)
    return StageChain(
        plan=plan,
        models=tuple(_FixedModel(c) for c in confidences),
        threshold=threshold,
        classes_=np.array([0, 1]),
        stage_costs=tuple(costs),
    )


def test_criterion_7_chain_walkthroughs():
    # confident first stage: exit immediately, pay only stage 1
    first = _stub_chain((0.9, 0.3), (5.0, 7.0), 0.75).evaluate(np.zeros(2))
    assert first == EvaluationTrace(1, True, 0, 0.9, 5.0)

    # never confident: rejected at the terminal stage, full chain cost paid
    rejected = _stub_chain((0.6, 0.7), (5.0, 7.0), 0.75).evaluate(np.zeros(2))
    assert rejected == EvaluationTrace(2, False, None, 0.7, 12.0)

    # middle-stage exit: the expensive third stage is never charged
    middle = _stub_chain((0.6, 0.8, 0.99), (4.0, 6.0, 100.0), 0.75).evaluate(np.zeros(3))
    assert middle == EvaluationTrace(2, True, 0, 0.8, 10.0)


def test_criterion_8_evolved_beats_baseline(wide, acceptance_notes):
    ds = wide.dataset
    total_cost = ds.total_cost

    # reference point: one stage holding every feature, 0.5 threshold, so
    # nothing is rejected and its accuracy is plain accuracy at full cost
    base_chain = train_chain(
        StagePlan.from_chromosome(Chromosome.single_stage(15)),
        ds.X_train, ds.y_train, ds.costs, threshold=0.5,
    )
    baseline = measure(base_chain, ds.X_test, ds.y_test)
    assert baseline.coverage == 1.0

    wins = 0
    accs, covs, costs = [], [], []
    for seed in range(50):
        cfg = GaConfig(population_size=24, max_iter=8, max_stages=4,
                       rng_seed=seed)
        best, _ = run(cfg, wide.search_eval).best()
        held_out = wide.report_eval.evaluate(best)
        wins += (held_out.accuracy > baseline.accuracy
                 and held_out.raw_cost < total_cost)
        accs.append(held_out.accuracy)
        covs.append(held_out.coverage)
        costs.append(held_out.raw_cost)

    acceptance_notes["8"] = (
        f"evolved means over 50 seeds: accuracy {np.mean(accs):.4f}, "
        f"coverage {np.mean(covs):.4f}, cost {np.mean(costs):.2f} "
        f"(comparison point 0.90 / 0.66 / 56.57; baseline accuracy "
        f"{baseline.accuracy:.4f} at full cost {total_cost:g})"
    )
    assert wins >= 45
