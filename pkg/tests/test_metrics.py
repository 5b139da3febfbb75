"""Metrics: AUC oracle, norms, interval statistics, and the capacity bound."""
import math

import numpy as np
import pytest

from adareg.metrics import (
    BoundInputs,
    auc,
    embedding_norms,
    feature_stats,
    logloss,
    mlp_frobenius_norms,
    rademacher_bound,
    write_feature_stats_csv,
)
from adareg.model import EmbeddingTable

from conftest import make_dataset


def brute_force_auc(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[np.asarray(labels) == 1]
    neg = scores[np.asarray(labels) == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_and_inverted(self):
        assert auc([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1]) == 1.0
        assert auc([4.0, 3.0, 2.0, 1.0], [1, 1, 0, 0]) == 1.0
        assert auc([1.0, 2.0, 3.0, 4.0], [1, 1, 0, 0]) == 0.0

    def test_all_tied_scores(self):
        assert auc([5.0, 5.0, 5.0, 5.0], [0, 1, 0, 1]) == 0.5

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 200))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            # integer scores force plenty of ties
            scores = rng.integers(0, 5, n).astype(np.float64)
            assert auc(scores, labels) == brute_force_auc(scores, labels)

    def test_monotone_transform_invariance(self, rng):
        scores = rng.normal(size=100)
        labels = rng.integers(0, 2, 100)
        labels[:2] = [0, 1]
        base = auc(scores, labels)
        assert auc(2.0 * scores + 1.0, labels) == base
        assert auc(np.arctan(scores), labels) == base

    def test_label_complement(self, rng):
        scores = rng.normal(size=50)
        labels = rng.integers(0, 2, 50)
        labels[:2] = [0, 1]
        assert auc(scores, 1 - labels) == pytest.approx(1.0 - auc(scores, labels), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc([1.0, 2.0], [1, 1])
        with pytest.raises(ValueError):
            auc([1.0, 2.0], [1, 1, 0])


class TestLogloss:
    def test_hand_value(self):
        assert logloss([0.0], [1]) == pytest.approx(math.log(2.0))

    def test_stable(self):
        assert np.isfinite(logloss([1000.0, -1000.0], [0, 1]))


class TestEmbeddingNorms:
    def test_zero_tables(self):
        l2, sq, per = embedding_norms([EmbeddingTable.zeros(3, 2)])
        assert l2 == 0.0 and sq == 0.0 and per == [(0.0, 0.0)]

    def test_hand_case(self):
        t = EmbeddingTable.zeros(2, 2)
        t.rows[:] = [[3.0, 4.0], [0.0, 0.0]]
        l2, sq, _ = embedding_norms([t])
        assert l2 == 5.0 and sq == 25.0

    def test_scaling_homogeneity(self, rng):
        t = EmbeddingTable.zeros(4, 3)
        t.rows[:] = rng.normal(size=(4, 3))
        l2, sq, _ = embedding_norms([t])
        t.rows *= 2.0
        l2b, sqb, _ = embedding_norms([t])
        assert l2b == pytest.approx(2.0 * l2) and sqb == pytest.approx(4.0 * sq)


class TestFeatureStats:
    def test_touch_pattern_hand_case(self):
        # batch size 3, 7 batches; id 0 touched at steps 1, 3, 7 giving
        # intervals 0, 1, 3; ids 1 and 2 are arranged so every touch in the
        # feature contributes the same 4/3 average
        col = [0, 0, 0, 1, 1, 1, 0, 0, 0, 2, 2, 2, 1, 1, 1, 2, 2, 2, 0, 1, 2]
        ds = make_dataset([col])
        stats = feature_stats(ds, 3)
        assert stats[0].mean_update_interval == 4.0 / 3.0

    def test_cardinality_one_feature(self):
        ds = make_dataset([[0] * 12, [0, 1, 2] * 4])
        stats = feature_stats(ds, 3)
        assert stats[0].mean_update_interval == 0.0
        assert stats[0].unique_ids == 1
        assert stats[0].mean_occurrences == 12.0

    def test_duplicates_in_batch_count_once(self):
        ds = make_dataset([[0, 0, 0, 0]])
        stats = feature_stats(ds, 2)
        # touches at steps 1 and 2, intervals 0 and 0
        assert stats[0].mean_update_interval == 0.0

    def test_empty_dataset_rejected(self):
        ds = make_dataset([[0]]).slice(0, 0)
        with pytest.raises(ValueError):
            feature_stats(ds, 2)

    def test_csv_output(self, tmp_path):
        ds = make_dataset([[0, 1, 0, 1]])
        stats = feature_stats(ds, 2)
        path = tmp_path / "stats.csv"
        write_feature_stats_csv(stats, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("feature_index")
        assert len(lines) == 2


class TestRademacherBound:
    def test_hand_case(self):
        b = BoundInputs(frobenius_norms=(1.0,), sum_tau=1.0, num_features=1, num_samples=1)
        assert rademacher_bound(b) == pytest.approx(math.sqrt(2.0 * math.log(2.0)) + 1.0, abs=1e-9)

    def test_zero_tau(self):
        b = BoundInputs(frobenius_norms=(2.0, 3.0), sum_tau=0.0, num_features=4, num_samples=100)
        assert rademacher_bound(b) == 0.0

    def test_tau_homogeneity(self):
        base = BoundInputs(frobenius_norms=(2.0,), sum_tau=1.5, num_features=2, num_samples=50)
        doubled = BoundInputs(frobenius_norms=(2.0,), sum_tau=3.0, num_features=2, num_samples=50)
        assert rademacher_bound(doubled) == pytest.approx(math.sqrt(2.0) * rademacher_bound(base))

    def test_monotonicity(self, rng):
        for _ in range(20):
            norms = tuple(rng.uniform(0.5, 3.0, size=3))
            tau = float(rng.uniform(0.1, 10.0))
            s = int(rng.integers(1, 10))
            t = int(rng.integers(10, 1000))
            base = rademacher_bound(BoundInputs(norms, tau, s, t))
            bigger_norm = (norms[0] * 1.5,) + norms[1:]
            assert rademacher_bound(BoundInputs(bigger_norm, tau, s, t)) > base
            assert rademacher_bound(BoundInputs(norms, tau * 1.5, s, t)) > base
            assert rademacher_bound(BoundInputs(norms, tau, s + 1, t)) > base
            assert rademacher_bound(BoundInputs(norms, tau, s, t * 2)) < base

    def test_validation(self):
        with pytest.raises(ValueError):
            rademacher_bound(BoundInputs((1.0,), 1.0, 0, 10))
        with pytest.raises(ValueError):
            rademacher_bound(BoundInputs((1.0,), -1.0, 1, 10))
        with pytest.raises(ValueError):
            rademacher_bound(BoundInputs((0.0,), 1.0, 1, 10))

    def test_frobenius_helper(self):
        w = np.array([[3.0, 0.0], [0.0, 4.0]])
        assert mlp_frobenius_norms([w]) == [5.0]
