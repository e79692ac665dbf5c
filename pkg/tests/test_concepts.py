import numpy as np
import pytest

from concepts import (
    ConceptGroup,
    ConceptGrouping,
    ConceptItem,
    RankedGroup,
    ablation_controls,
    concept_experiment,
    concept_table,
    epsilon_sweep,
    fragment_items,
    kmeans,
    overlap_metrics,
    overlap_once,
    rank_groups,
    select_concepts,
    window_count,
)
from data_io import CONCEPT_BLOCKS, SyntheticSpec, generate_synthetic
from errors import RejectedInputError
from nn_core import NetConfig, TrainConfig, build_net, train


def items_with(importances):
    return [ConceptItem(i, i, np.zeros(2), np.zeros(2), importance=v) for i, v in enumerate(importances)]


def ranked(selections):
    return [RankedGroup(g, 0.0, list(ids)) for g, ids in enumerate(selections)]


class TestKMeans:
    def test_one_cluster_per_item(self, rng):
        X = rng.normal(size=(6, 3))
        grouping = kmeans(X, 6, seed=0)
        assert grouping.wcss == pytest.approx(0.0, abs=1e-20)
        assert sorted(len(g.member_ids) for g in grouping.groups) == [1] * 6

    def test_separated_blobs(self, rng):
        centers = np.array([[0.0, 0.0], [10.0, 10.0]])
        truth = np.repeat([0, 1], 40)
        X = centers[truth] + rng.normal(size=(80, 2))
        labels = kmeans(X, 2, seed=3).labels
        nearest = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
        assert (np.array_equal(labels, nearest) or np.array_equal(labels, 1 - nearest))

    def test_same_seed_same_assignment(self, rng):
        X = rng.normal(size=(50, 4))
        np.testing.assert_array_equal(kmeans(X, 5, seed=9).labels, kmeans(X, 5, seed=9).labels)

    def test_no_empty_groups_with_duplicates(self):
        X = np.array([[0.0], [0.0], [0.0], [1.0]])
        grouping = kmeans(X, 3, seed=0)
        assert all(g.member_ids for g in grouping.groups)

    def test_k_larger_than_items(self, rng):
        with pytest.raises(RejectedInputError):
            kmeans(rng.normal(size=(3, 2)), 4, seed=0)

    def test_wcss_never_increases(self, rng):
        history = kmeans(rng.normal(size=(60, 3)), 4, seed=1, restarts=1).wcss_history
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


class TestRanking:
    def test_equal_importance_keeps_group_order(self):
        items = items_with([1.0] * 6)
        grouping = ConceptGrouping([ConceptGroup(np.zeros(2), [0, 1]), ConceptGroup(np.zeros(2), [2, 3]),
                                    ConceptGroup(np.zeros(2), [4, 5])], k=3, seed=0)
        assert [g.group_index for g in rank_groups(grouping, items)] == [0, 1, 2]

    def test_heaviest_group_first(self):
        items = items_with([0.1, 0.2, 5.0, 4.0, 0.3, 0.1])
        grouping = ConceptGrouping([ConceptGroup(np.zeros(2), [0, 1]), ConceptGroup(np.zeros(2), [2, 3]),
                                    ConceptGroup(np.zeros(2), [4, 5])], k=3, seed=0)
        first = rank_groups(grouping, items, top=1)[0]
        assert first.group_index == 1
        assert first.selected_ids == [2]

    def test_matches_sort_oracle(self, rng):
        importances = rng.random(40)
        items = items_with(importances)
        members = np.array_split(rng.permutation(40), 8)
        grouping = ConceptGrouping([ConceptGroup(np.zeros(2), m.tolist()) for m in members], k=8, seed=0)
        order = sorted(range(8), key=lambda g: (-np.mean(importances[members[g]]), g))
        assert [g.group_index for g in rank_groups(grouping, items)] == order


class TestOverlap:
    def test_identical_selections(self):
        runs = ranked([[1, 2, 3], [4, 5]])
        n, m = overlap_once(runs, runs)
        assert n == m == 5
        assert overlap_metrics([runs], [runs]).hit_rate == 1.0

    def test_disjoint_selections(self):
        report = overlap_metrics([ranked([[1, 2], [3]])], [ranked([[4], [5, 6]])])
        assert (report.N, report.M, report.hit_rate) == (0.0, 0.0, 0.0)
        assert report.hit_rate_defined is False

    def test_universe_mismatch(self):
        with pytest.raises(RejectedInputError):
            overlap_once(ranked([[1, 2]]), ranked([[3, 99]]), universe=range(10))

    def test_greedy_matching_pairs_groups_once(self):
        ours = ranked([[1, 2, 3], [4]])
        reference = ranked([[1, 2], [3, 4]])
        assert overlap_once(ours, reference) == (3, 4)

    def test_random_selections_follow_hypergeometric_mean(self):
        rng = np.random.default_rng(7)
        ours, reference = [], []
        for _ in range(1000):
            a = rng.choice(500, size=100, replace=False).reshape(10, 10)
            b = rng.choice(500, size=100, replace=False).reshape(10, 10)
            ours.append(ranked(a.tolist()))
            reference.append(ranked(b.tolist()))
        report = overlap_metrics(ours, reference, universe=range(500))
        assert report.M == pytest.approx(100 * 100 / 500, rel=0.1)
        assert report.N <= report.M


class TestFragments:
    def test_windows_are_masked_and_scored(self):
        X = np.arange(10.0).reshape(2, 5)
        scores = np.ones((2, 5))
        items = fragment_items(X, X + 1.0, scores, window=2, sample_ids=[7, 9])
        assert len(items) == 2 * window_count(5, 2) == 6
        last = items[2]
        np.testing.assert_array_equal(last.vector_original, [0, 0, 0, 0, 4.0])
        np.testing.assert_array_equal(last.vector_transformed, [0, 0, 0, 0, 5.0])
        assert last.importance == 1.0
        assert [it.source_sample_id for it in items] == [7, 7, 7, 9, 9, 9]

    def test_ablations_share_group_count(self, rng):
        X = rng.normal(size=(12, 6))
        items = fragment_items(X, 2 * X, np.abs(X), window=3)
        g1, g2 = ablation_controls(items, 4, seed=2, top=3)
        assert len(g1) == len(g2) == 4
        assert all(len(g.selected_ids) <= 3 for g in g2)


@pytest.mark.slow
class TestExperiments:
    @pytest.fixture(scope="class")
    def concept_setup(self):
        spec = SyntheticSpec(kind=CONCEPT_BLOCKS, n=120, d=12, window=4, noise_sigma=0.2)
        data = generate_synthetic(spec, seed=5)
        net = build_net(12, 2, NetConfig(hidden=(8,)), seed=1)
        return train(net, data, TrainConfig(epochs=10, seed=2)), data

    def test_reports_every_method(self, concept_setup):
        net, data = concept_setup
        reports = concept_experiment(net, data, 100.0, window=4, repetitions=3, seed=0)
        assert set(reports) == {"full", "g1", "g2"}
        for report in reports.values():
            assert report.repetitions == 3
            assert 0.0 <= report.N <= report.M
            assert 0.0 <= report.hit_rate <= 1.0
        table = concept_table(reports)
        assert list(table["method"]) == ["full", "g1", "g2"]

    def test_seeded_repetitions_repeat(self, concept_setup):
        net, data = concept_setup
        a = concept_experiment(net, data, 100.0, window=4, repetitions=2, seed=4)
        b = concept_experiment(net, data, 100.0, window=4, repetitions=2, seed=4)
        assert a["full"] == b["full"]

    def test_epsilon_sweep(self, concept_setup):
        net, data = concept_setup
        frame, trend = epsilon_sweep(net, data, [1.0, 100.0], window=4, repetitions=2, seed=0)
        assert list(frame["epsilon"]) == [1.0, 100.0]
        assert -1.0 <= trend <= 1.0


class TestAblations:
    def test_zero_transformation_collapses_to_g1(self, rng):
        X = rng.normal(size=(15, 8))
        items = fragment_items(X, X, np.abs(X), window=2)
        g1, _ = ablation_controls(items, 5, seed=3, top=4)
        _, full = select_concepts(items, 5, seed=3, top=4)
        assert [g.selected_ids for g in full] == [g.selected_ids for g in g1]

    def test_random_selection_is_seeded(self, rng):
        X = rng.normal(size=(15, 8))
        items = fragment_items(X, 3 * X, np.abs(X), window=2)
        first = ablation_controls(items, 5, seed=8, top=4)[1]
        second = ablation_controls(items, 5, seed=8, top=4)[1]
        assert [g.selected_ids for g in first] == [g.selected_ids for g in second]
