from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from vishbench.classify import Algorithm, ClassifierSpec, TrainedClassifier, default_suite, train, validate_hyperparams
from vishbench.classify.ensemble import log_loss
from vishbench.classify.linear import logistic_loss, logistic_loss_and_grad
from vishbench.classify.tree import GINI, build_tree
from vishbench.errors import ConfigError, ShapeError, TrainingError

ALL = list(Algorithm)
FAST = {
    Algorithm.RANDOM_FOREST: {"n_trees": 15},
    Algorithm.GRADIENT_BOOSTING: {"n_rounds": 20},
    Algorithm.ADABOOST: {"n_rounds": 15},
}


def spec(alg, seed=0, **hp):
    return ClassifierSpec(alg, {**FAST.get(alg, {}), **hp}, seed)


def clusters(n=20, seed=0):
    rng = np.random.default_rng(seed)
    pos = rng.normal([2.0, 2.0], 0.3, size=(n // 2, 2))
    neg = rng.normal([-2.0, -2.0], 0.3, size=(n - n // 2, 2))
    X = np.vstack([pos, neg])
    y = np.r_[np.ones(n // 2, int), np.zeros(n - n // 2, int)]
    return X, y


def xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 3, dtype=float)
    y = np.array([0, 1, 1, 0] * 3)
    return X, y


class TestLinear:
    @pytest.mark.parametrize("alg", [Algorithm.LOGISTIC_REGRESSION, Algorithm.LINEAR_SVM])
    def test_separable_training_accuracy(self, alg):
        X, y = clusters()
        m = train(spec(alg), X, y)
        assert np.array_equal(m.predict(X), y)

    @pytest.mark.parametrize("alg", [Algorithm.LOGISTIC_REGRESSION, Algorithm.LINEAR_SVM])
    def test_loss_non_increasing(self, alg):
        X, y = clusters(40, 3)
        hist = train(spec(alg), X, y).model_state.loss_history
        assert len(hist) > 10
        assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))

    def test_logistic_scores_in_open_interval(self):
        X, y = clusters()
        s = train(spec(Algorithm.LOGISTIC_REGRESSION), X, y).decision_score(X * 0.1)
        assert np.all((s > 0) & (s < 1))

    def test_svm_prediction_is_sign_of_margin(self):
        X, y = clusters()
        m = train(spec(Algorithm.LINEAR_SVM), X, y)
        Q = np.random.default_rng(1).normal(size=(50, 2))
        assert np.array_equal(m.predict(Q), (m.decision_score(Q) > 0).astype(int))

    @pytest.mark.parametrize("alg", [Algorithm.LOGISTIC_REGRESSION, Algorithm.LINEAR_SVM])
    def test_label_flip_flips_predictions(self, alg):
        X, y = clusters(30, 5)
        Q = np.random.default_rng(2).normal(0, 2, size=(40, 2))
        a = train(spec(alg), X, y).predict(Q)
        b = train(spec(alg), X, 1 - y).predict(Q)
        assert np.array_equal(a, 1 - b)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_gradient_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 12, 5
        X = sp.csr_matrix(rng.normal(size=(n, d)) * (rng.random((n, d)) < 0.6))
        y = rng.integers(0, 2, n).astype(float)
        w, b, l2 = rng.normal(size=d), float(rng.normal()), 0.1
        _, gw, gb = logistic_loss_and_grad(w, b, X, y, l2)
        h = 1e-6
        num = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            num[j] = (logistic_loss(w + e, b, X, y, l2) - logistic_loss(w - e, b, X, y, l2)) / (2 * h)
        numb = (logistic_loss(w, b + h, X, y, l2) - logistic_loss(w, b - h, X, y, l2)) / (2 * h)
        g, ng = np.r_[gw, gb], np.r_[num, numb]
        assert np.linalg.norm(g - ng) / max(np.linalg.norm(ng), 1e-12) < 1e-5


class TestTrees:
    def test_xor_depth_two(self):
        X, y = xor()
        m = train(spec(Algorithm.DECISION_TREE, max_depth=2), X, y)
        assert np.array_equal(m.predict(X), y)

    def test_xor_stump_cannot(self):
        X, y = xor()
        m = train(spec(Algorithm.DECISION_TREE, max_depth=1), X, y)
        assert (m.predict(X) == y).mean() < 1.0

    def test_tie_break_lowest_feature(self):
        # columns 0 and 2 are identical copies of the label; the split must use column 0
        y = np.array([0, 0, 1, 1, 0, 1])
        X = sp.csr_matrix(np.c_[y, np.zeros(6), y, np.ones(6)].astype(float))
        tree = build_tree(X, y.astype(float), criterion=GINI, max_depth=1)
        assert tree.feature[0] == 0

    def test_pure_node_is_leaf(self):
        X = sp.csr_matrix(np.eye(4))
        tree = build_tree(X, np.ones(4), criterion=GINI)
        assert tree.n_nodes == 1

    def test_forest_score_granularity(self):
        X, y = clusters(30)
        m = train(spec(Algorithm.RANDOM_FOREST, n_trees=7), X, y)
        s = m.decision_score(np.random.default_rng(0).normal(0, 2, (40, 2)))
        assert np.all((s >= 0) & (s <= 1))
        assert np.allclose(s * 7, np.round(s * 7))

    def test_boosting_loss_non_increasing(self):
        X, y = clusters(40, 7)
        X = X + np.random.default_rng(1).normal(0, 1.5, X.shape)
        m = train(spec(Algorithm.GRADIENT_BOOSTING, n_rounds=30), X, y)
        hist = m.model_state.loss_history
        assert len(hist) == 31
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))
        F = m.model_state.raw_scores(sp.csr_matrix(X))
        assert log_loss(y, F) == pytest.approx(hist[-1], rel=1e-9)


class TestContract:
    @pytest.mark.parametrize("alg", ALL)
    def test_deterministic_and_round_trip(self, alg, tmp_path):
        X, y = clusters(30, 11)
        X = X + np.random.default_rng(4).normal(0, 1.0, X.shape)
        Q = np.random.default_rng(5).normal(0, 2, (25, 2))
        a, b = train(spec(alg, 42), X, y), train(spec(alg, 42), X, y)
        assert np.array_equal(a.decision_score(Q), b.decision_score(Q))
        a.save(tmp_path / "m.json")
        c = TrainedClassifier.load(tmp_path / "m.json")
        assert np.array_equal(a.decision_score(Q), c.decision_score(Q))
        assert np.array_equal(a.predict(Q), c.predict(Q))

    @pytest.mark.parametrize("alg", ALL)
    def test_predict_is_thresholded_score(self, alg):
        X, y = clusters(30, 1)
        m = train(spec(alg), X, y)
        Q = np.vstack([np.random.default_rng(6).normal(0, 2, (30, 2)), np.zeros((1, 2))])
        assert np.array_equal(m.predict(Q), (m.decision_score(Q) > m.threshold).astype(int))

    @pytest.mark.parametrize("alg", ALL)
    def test_dimension_mismatch(self, alg):
        X, y = clusters()
        m = train(spec(alg), X, y)
        with pytest.raises(ShapeError):
            m.predict(np.zeros((1, 3)))

    @pytest.mark.parametrize("alg", ALL)
    def test_single_class(self, alg):
        with pytest.raises(TrainingError):
            train(spec(alg), np.ones((4, 2)), [1, 1, 1, 1])

    def test_too_few_rows(self):
        with pytest.raises(TrainingError):
            train(spec(Algorithm.DECISION_TREE), np.ones((1, 2)), [1])

    def test_zero_score_predicts_benign(self):
        # an all-zero model has margin exactly 0 everywhere
        X, y = clusters()
        m = train(spec(Algorithm.LINEAR_SVM), X, y)
        m.model_state.w[:] = 0.0
        m.model_state.b = 0.0
        assert m.predict(np.ones((3, 2))).tolist() == [0, 0, 0]

    def test_hyperparameter_validation(self):
        with pytest.raises(ConfigError):
            validate_hyperparams(Algorithm.RANDOM_FOREST, {"n_trees": 0})
        with pytest.raises(ConfigError):
            validate_hyperparams(Algorithm.LOGISTIC_REGRESSION, {"depth": 3})
        with pytest.raises(ConfigError):
            ClassifierSpec("NaiveBayes")
        hp = validate_hyperparams(Algorithm.GRADIENT_BOOSTING, {})
        assert hp["n_rounds"] == 100 and hp["learning_rate"] == 0.1 and hp["max_depth"] == 3

    def test_default_suite(self):
        suite = default_suite(3)
        assert [s.algorithm for s in suite] == ALL
