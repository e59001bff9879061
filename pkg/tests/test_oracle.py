"""Exhaustive enumeration, global fronts, recovery tracking, front files."""

import itertools

import numpy as np
import pytest

from evochain.chromosome import Chromosome, search_space_size
from evochain.data import assemble_dataset
from evochain.evolution import GaConfig, RunResult, run
from evochain.objectives import ChainEvaluator, ObjectiveVector
from evochain.oracle import (
    EnumerationCapError,
    GlobalFront,
    enumerate_solutions,
    global_front,
    load_front,
    save_front,
    track_recovery,
)


def product_filter_enumeration(n, k):
    """Independent route: filter the full label-vector product down to
    gap-free assignments with at most k stages."""
    keep = set()
    for genes in itertools.product(range(k), repeat=n):
        used = set(genes)
        if used == set(range(len(used))):
            keep.add(genes)
    return keep


class TestEnumeration:
    def test_three_features_two_stages(self):
        got = list(enumerate_solutions(3, 2))
        assert len(got) == 7
        assert len({c.genes for c in got}) == 7

    def test_single_stage_space(self):
        assert list(enumerate_solutions(4, 1)) == [Chromosome((0, 0, 0, 0))]

    def test_four_features_three_stages(self):
        got = {c.genes for c in enumerate_solutions(4, 3)}
        assert len(got) == 51

    @pytest.mark.parametrize("n,k", [(3, 2), (4, 3), (5, 3), (6, 4), (7, 2)])
    def test_matches_product_filter_and_closed_form(self, n, k):
        got = [c.genes for c in enumerate_solutions(n, k)]
        assert len(got) == len(set(got)) == search_space_size(n, k)
        assert set(got) == product_filter_enumeration(n, k)

    def test_every_member_canonical_and_within_cap(self):
        for c in enumerate_solutions(5, 4):
            assert c.is_canonical()
            assert c.stage_count <= 4

    def test_cap_refusal_names_the_size(self):
        with pytest.raises(EnumerationCapError) as err:
            list(enumerate_solutions(6, 3, cap=602))
        assert err.value.size == 603
        assert err.value.cap == 602
        assert "603" in str(err.value)

    def test_cap_is_inclusive(self):
        got = list(enumerate_solutions(6, 3, cap=603))
        assert len(got) == 603


@pytest.fixture(scope="module")
def evaluator():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(24, 3))
    y = np.tile([0, 1], 12)
    dataset = assemble_dataset(X, y, costs=[1.0, 2.0, 3.0], split_seed=0)
    return ChainEvaluator.from_dataset(dataset, threshold=0.6)


def pairwise_front_reference(entries):
    """Quadratic non-dominated scan over (coverage, accuracy, -raw_cost)."""

    def point(obj):
        return (obj.coverage, obj.accuracy, -obj.raw_cost)

    def dom(a, b):
        return all(x >= y for x, y in zip(a, b)) and point_ne(a, b)

    def point_ne(a, b):
        return a != b

    keep = set()
    for c, obj in entries:
        if not any(
            dom(point(other_obj), point(obj)) for _, other_obj in entries
        ):
            keep.add(c.genes)
    return keep


class TestGlobalFront:
    def test_front_properties_on_full_space(self, evaluator):
        front = global_front(evaluator, n=3, k=3)
        assert front.total_evaluated == search_space_size(3, 3) == 13
        genes = front.gene_set()
        assert 1 <= len(genes) <= 13
        # no member dominates another
        pts = [
            (o.coverage, o.accuracy, -o.raw_cost) for _, o in front.members
        ]
        for a, b in itertools.permutations(pts, 2):
            assert not (
                all(x >= y for x, y in zip(a, b)) and a != b
            )

    def test_matches_pairwise_reference(self, evaluator):
        entries = [
            (c, evaluator.evaluate(c)) for c in enumerate_solutions(3, 3)
        ]
        front = global_front(evaluator, n=3, k=3)
        assert front.gene_set() == pairwise_front_reference(entries)

    def test_every_outsider_is_dominated(self, evaluator):
        front = global_front(evaluator, n=3, k=3)
        genes = front.gene_set()
        pts = {
            c.genes: (o.coverage, o.accuracy, -o.raw_cost)
            for c, o in ((c, evaluator.evaluate(c)) for c in enumerate_solutions(3, 3))
        }
        for g, p in pts.items():
            if g in genes:
                continue
            assert any(
                all(x >= y for x, y in zip(pts[m], p)) and pts[m] != p
                for m in genes
            )

    def test_inverse_costs_normalized_to_global_minimum(self, evaluator):
        front = global_front(evaluator, n=3, k=3)
        all_costs = [
            evaluator.evaluate(c).raw_cost for c in enumerate_solutions(3, 3)
        ]
        assert front.min_raw_cost == min(all_costs)
        for _, obj in front.members:
            assert obj.inverse_cost == front.min_raw_cost / obj.raw_cost
        assert max(o.inverse_cost for _, o in front.members) == 1.0

    def test_normalized_domination_gives_same_front(self, evaluator):
        entries = [(c, evaluator.evaluate(c)) for c in enumerate_solutions(3, 3)]
        min_raw = min(o.raw_cost for _, o in entries)
        normalized = [
            (c, o.with_inverse(min_raw / o.raw_cost)) for c, o in entries
        ]

        def dom(a, b):
            return all(x >= y for x, y in zip(a, b)) and a != b

        pts = [(c.genes, o.as_point()) for c, o in normalized]
        keep = {
            g
            for g, p in pts
            if not any(dom(q, p) for _, q in pts)
        }
        assert keep == global_front(evaluator, n=3, k=3).gene_set()

    def test_cap_propagates(self, evaluator):
        with pytest.raises(EnumerationCapError):
            global_front(evaluator, n=3, k=3, cap=12)


class TestRecoveryTracking:
    @staticmethod
    def fake_result(members_per_generation):
        return RunResult(
            front=[],
            generations=[],
            generation_members=[tuple(m) for m in members_per_generation],
            halt_reason="",
            final=None,
        )

    @staticmethod
    def fake_front(gene_vectors):
        members = [
            (Chromosome(g), ObjectiveVector(1.0, 1.0, raw_cost=1.0, inverse_cost=1.0))
            for g in gene_vectors
        ]
        return GlobalFront(
            n_features=len(gene_vectors[0]),
            max_stages=2,
            members=members,
            total_evaluated=0,
            min_raw_cost=1.0,
        )

    def test_counts_distinct_front_members_per_generation(self):
        front = self.fake_front([(0, 1, 0), (0, 0, 1)])
        result = self.fake_result(
            [
                ((0, 1, 0),),
                ((0, 1, 0), (0, 1, 1)),
                ((0, 1, 0), (0, 0, 1), (0, 1, 1)),
            ]
        )
        assert track_recovery(result, front) == [1, 1, 2]

    def test_search_run_recovery_length(self, evaluator):
        front = global_front(evaluator, n=3, k=3)
        result = run(
            GaConfig(population_size=8, max_iter=5, rng_seed=3), evaluator
        )
        recovery = track_recovery(result, front)
        assert len(recovery) == result.n_generations
        assert all(0 <= x <= len(front) for x in recovery)


class TestFrontFiles:
    @staticmethod
    def sample_members():
        return [
            (
                Chromosome((0, 1, 0)),
                ObjectiveVector(0.9, 0.8125, raw_cost=10.25, inverse_cost=1.0),
            ),
            (
                Chromosome((0, 0, 1)),
                ObjectiveVector(1.0, 0.7, raw_cost=36.75, inverse_cost=10.25 / 36.75),
            ),
        ]

    def test_round_trip_preserves_everything(self, tmp_path):
        path = tmp_path / "front.csv"
        save_front(path, self.sample_members(), config_hash="abc123")
        loaded = load_front(path)
        assert loaded.format_version == "1"
        assert loaded.config_hash == "abc123"
        assert len(loaded) == 2
        for (c, o), (lc, lo, rank, fit) in zip(self.sample_members(), loaded.entries):
            assert lc == c
            assert lo.coverage == o.coverage
            assert lo.accuracy == o.accuracy
            assert lo.raw_cost == o.raw_cost
            assert lo.inverse_cost == o.inverse_cost
            assert rank == 0
            assert fit > 0.0

    def test_identical_saves_are_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        save_front(a, self.sample_members(), config_hash="h")
        save_front(b, self.sample_members(), config_hash="h")
        assert a.read_bytes() == b.read_bytes()

    def test_explicit_ranks_and_fitness(self, tmp_path):
        path = tmp_path / "front.csv"
        save_front(
            path,
            self.sample_members(),
            config_hash="h",
            ranks=[2, 1],
            fitness=[3.5, 1.25],
        )
        loaded = load_front(path)
        assert [(r, f) for _, _, r, f in loaded.entries] == [(2, 3.5), (1, 1.25)]

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_front(path)

    def test_rejects_wrong_columns(self, tmp_path):
        path = tmp_path / "front.csv"
        path.write_text("# evochain-front v1 config=h\nchromosome,coverage\n")
        with pytest.raises(ValueError):
            load_front(path)

    def test_rejects_malformed_record(self, tmp_path):
        path = tmp_path / "front.csv"
        save_front(path, self.sample_members())
        path.write_text(path.read_text() + "0-1,bad\n")
        with pytest.raises(ValueError):
            load_front(path)
