"""Ordinal exertion head: clustering, cumulative targets, rank-consistent
probabilities, and the shared-weight threshold layer."""

import numpy as np
import pytest

from pausebench.exertion import (
    LOW_LABEL, HIGH_LABEL, ExertionLabel, cluster_exertion, pool_features,
    ordinal_targets, coral_loss, ordered_biases, ordered_biases_grad,
    CoralHead, init_coral_head, coral_predict, coral_predict_batch,
    train_coral_head,
)
from pausebench.features import FeatureMatrix
from pausebench.losses import bce_loss, sigmoid


class TestClusterExertion:
    @pytest.mark.parametrize("level,expect", [
        (1, LOW_LABEL), (2, LOW_LABEL), (3, HIGH_LABEL), (4, HIGH_LABEL), (5, HIGH_LABEL),
    ])
    def test_mapping(self, level, expect):
        label = cluster_exertion(level)
        assert label.binary == expect
        assert label.raw_level == level

    @pytest.mark.parametrize("level", [0, 6, -1])
    def test_range(self, level):
        with pytest.raises(ValueError):
            cluster_exertion(level)

    def test_label_validation(self):
        with pytest.raises(ValueError):
            ExertionLabel(raw_level=3, binary="medium")


class TestPoolFeatures:
    def test_mean_over_time(self, rng):
        X = rng.normal(size=(20, 6))
        np.testing.assert_allclose(pool_features(X), X.mean(axis=0))

    def test_accepts_feature_matrix(self, rng):
        fm = FeatureMatrix(rng.normal(size=(10, 40)), kind="mfb")
        np.testing.assert_allclose(pool_features(fm), fm.data.mean(axis=0))


class TestOrdinalTargets:
    def test_cumulative_encoding(self):
        t = ordinal_targets(np.array([1, 3, 5]), 5)
        np.testing.assert_array_equal(t, [[0, 0, 0, 0], [1, 1, 0, 0], [1, 1, 1, 1]])

    def test_rows_non_increasing(self, rng):
        t = ordinal_targets(rng.integers(1, 6, size=50), 5)
        assert (np.diff(t, axis=1) <= 0).all()

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ordinal_targets(np.array([0]), 5)
        with pytest.raises(ValueError):
            ordinal_targets(np.array([6]), 5)


class TestCoralLoss:
    def test_two_level_equals_binary_cross_entropy_exactly(self, rng):
        p = rng.uniform(0.02, 0.98, size=(9, 1))
        t = rng.integers(0, 2, size=(9, 1)).astype(np.float64)
        c = coral_loss(p, t)
        b = bce_loss(p.ravel(), t.ravel())
        assert c.value == b.value
        assert np.array_equal(c.grad.ravel(), b.grad)

    def test_hand_value(self):
        # single row, p = [0.5, 0.5], t = [1, 0]: two BCE terms of log 2
        out = coral_loss(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]))
        assert out.value == pytest.approx(2 * np.log(2))

    def test_grad_matches_fd(self, rng):
        p = rng.uniform(0.05, 0.95, size=(6, 4))
        levels = rng.integers(1, 6, size=6)
        t = ordinal_targets(levels, 5).astype(np.float64)
        out = coral_loss(p, t)
        eps = 1e-6
        num = np.zeros_like(p)
        for idx in np.ndindex(*p.shape):
            pp = p.copy(); pp[idx] += eps
            pm = p.copy(); pm[idx] -= eps
            num[idx] = (coral_loss(pp, t).value - coral_loss(pm, t).value) / (2 * eps)
        np.testing.assert_allclose(out.grad, num, rtol=1e-5, atol=1e-9)

    def test_target_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            coral_loss(np.full((1, 2), 0.5), np.array([[0.0, 1.0]]))

    def test_binary_targets_enforced(self):
        with pytest.raises(ValueError):
            coral_loss(np.full((1, 2), 0.5), np.array([[0.5, 0.0]]))


class TestOrderedBiases:
    def test_first_passes_through(self):
        raw = np.array([2.0, 0.3, -1.0])
        b = ordered_biases(raw)
        assert b[0] == 2.0
        assert (np.diff(b) < 0).all()

    def test_non_increasing_for_any_raw(self, rng):
        for _ in range(50):
            b = ordered_biases(rng.normal(scale=3.0, size=6))
            assert (np.diff(b) <= 0).all()

    def test_grad_matches_fd(self, rng):
        raw = rng.normal(size=5)
        g_out = rng.normal(size=5)
        analytic = ordered_biases_grad(raw, g_out)
        eps = 1e-6
        for i in range(5):
            rp = raw.copy(); rp[i] += eps
            rm = raw.copy(); rm[i] -= eps
            num = ((ordered_biases(rp) - ordered_biases(rm)) / (2 * eps)) @ g_out
            assert analytic[i] == pytest.approx(num, rel=1e-5, abs=1e-9)


class TestCoralHead:
    def test_probabilities_rank_consistent(self, rng):
        head = init_coral_head(12, 5, seed=3)
        x = rng.normal(size=(20, 12))
        p = head.probabilities(x)
        assert p.shape == (20, 4)
        assert (np.diff(p, axis=1) <= 1e-15).all()

    def test_predict_counts_positive_logits(self):
        head = CoralHead(weight=np.array([1.0]), raw_bias=np.array([0.0, 0.0]))
        # logits = x + b; b = [0, -softplus(0)]
        x = np.array([[0.5]])
        logits = head.logits(x)
        expect = 1 + int(logits[0, 0] > 0) + int(logits[0, 1] > 0)
        assert coral_predict(head, np.array([0.5])) == expect

    def test_predict_extremes(self):
        head = CoralHead(weight=np.array([1.0]), raw_bias=np.array([-5.0, -5.0]))
        assert coral_predict(head, np.array([0.0])) == 1
        head_hi = CoralHead(weight=np.array([1.0]), raw_bias=np.array([100.0, -5.0]))
        assert coral_predict(head_hi, np.array([0.0])) == 3

    def test_batch_matches_single(self, rng):
        head = init_coral_head(4, 5, seed=0)
        X = rng.normal(size=(10, 4))
        batch = coral_predict_batch(head, X)
        singles = [coral_predict(head, x) for x in X]
        np.testing.assert_array_equal(batch, singles)
        assert batch.min() >= 1 and batch.max() <= 5


class TestTrainCoralHead:
    def test_learns_separable_ordering(self, rng):
        # one informative dimension strictly ordered by level
        levels = rng.integers(1, 6, size=300)
        X = np.zeros((300, 3))
        X[:, 0] = levels + rng.normal(scale=0.05, size=300)
        X[:, 1:] = rng.normal(size=(300, 2))
        head, history = train_coral_head(X, levels, n_levels=5, epochs=400,
                                         lr=0.1, seed=0)
        pred = coral_predict_batch(head, X)
        assert (pred == levels).mean() > 0.9
        assert history[-1] < history[0]

    def test_deterministic(self, rng):
        levels = rng.integers(1, 3, size=40)
        X = rng.normal(size=(40, 2)) + levels[:, None]
        a, ha = train_coral_head(X, levels, n_levels=2, epochs=50, lr=0.05, seed=1)
        b, hb = train_coral_head(X, levels, n_levels=2, epochs=50, lr=0.05, seed=1)
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.raw_bias, b.raw_bias)
        assert ha == hb

    def test_binary_clustered_levels(self, rng):
        # levels fed as 1/2 after Low/High clustering
        raw_levels = rng.integers(1, 6, size=200)
        binary = np.where(raw_levels <= 2, 1, 2)
        X = np.zeros((200, 2))
        X[:, 0] = binary + rng.normal(scale=0.1, size=200)
        head, _ = train_coral_head(X, binary, n_levels=2, epochs=300, lr=0.1, seed=2)
        pred = coral_predict_batch(head, X)
        assert (pred == binary).mean() > 0.95
