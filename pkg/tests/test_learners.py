import json

import numpy as np
import pytest

from subsetforge.learners import (
    ALL_KINDS,
    BASE_KINDS,
    FitError,
    Learner,
    LearnerKind,
    fit,
    fit_stacked,
    get_learner,
    leakage_audit,
    model_from_json,
    model_to_json,
    predict_labels,
    predict_scores,
    validate_params,
)
from subsetforge.learners import boosting, logistic, neural
from subsetforge.learners.forest import fit_tree, tree_labels
from subsetforge.learners.trees import make_bins
from subsetforge.metrics import auc_score

FAST = {
    "LR": {},
    "SVM": {"epochs": 20},
    "RF": {"n_trees": 15, "max_depth": 5},
    "ANN": {"hidden_units": 8, "epochs": 20},
    "GBT": {"rounds": 20, "max_depth": 3},
}


def toy(n=300, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    logits = 2.0 * X[:, 0] - 1.5 * X[:, 1]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(int)
    return X, y


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


FIXTURE_X = np.array([
    [0.5, -1.2, 0.3],
    [1.5, 0.4, -0.7],
    [-0.3, 0.8, 1.1],
    [0.9, -0.5, -1.4],
    [-1.1, 1.3, 0.2],
])
FIXTURE_Y = np.array([1.0, 1.0, 0.0, 1.0, 0.0])


class TestGradients:
    def test_logistic_finite_differences(self):
        w = np.array([0.3, -0.2, 0.5])
        b = 0.1
        C = 2.0
        _, gw, gb = logistic.objective(w, b, FIXTURE_X, FIXTURE_Y, C)
        h = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            num = (logistic.objective(w + e, b, FIXTURE_X, FIXTURE_Y, C)[0]
                   - logistic.objective(w - e, b, FIXTURE_X, FIXTURE_Y, C)[0]) / (2 * h)
            assert rel_err(gw[j], num) < 1e-5
        num_b = (logistic.objective(w, b + h, FIXTURE_X, FIXTURE_Y, C)[0]
                 - logistic.objective(w, b - h, FIXTURE_X, FIXTURE_Y, C)[0]) / (2 * h)
        assert rel_err(gb, num_b) < 1e-5

    def test_neural_finite_differences(self):
        weights = neural.init_weights(3, 4, np.random.default_rng(7))
        weights["b1"] = np.full(4, 0.05)
        _, grads = neural.loss_and_grad(weights, FIXTURE_X, FIXTURE_Y, 1e-3)
        h = 1e-6
        for key, g in grads.items():
            flat = weights[key].reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = neural.loss_and_grad(weights, FIXTURE_X, FIXTURE_Y, 1e-3)[0]
                flat[i] = old - h
                down = neural.loss_and_grad(weights, FIXTURE_X, FIXTURE_Y, 1e-3)[0]
                flat[i] = old
                assert rel_err(g.reshape(-1)[i], (up - down) / (2 * h)) < 1e-4, (key, i)


class TestContract:
    @pytest.mark.parametrize("kind", [k.value for k in BASE_KINDS])
    def test_fit_and_score(self, kind):
        X, y = toy()
        model = fit(kind, FAST[kind], X[:200], y[:200], seed=1)
        s = predict_scores(model, X[200:])
        assert s.shape == (100,) and np.all(np.isfinite(s))
        assert auc_score(y[200:], s) > 0.75
        labels = predict_labels(model, X[200:])
        np.testing.assert_array_equal(labels, (s >= model.threshold).astype(int))

    @pytest.mark.parametrize("kind", [k.value for k in BASE_KINDS])
    def test_deterministic(self, kind):
        X, y = toy()
        a = predict_scores(fit(kind, FAST[kind], X, y, seed=5), X)
        b = predict_scores(fit(kind, FAST[kind], X, y, seed=5), X)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("kind", [k.value for k in BASE_KINDS])
    def test_json_round_trip(self, kind):
        X, y = toy(n=120)
        model = fit(kind, FAST[kind], X, y, seed=2)
        back = model_from_json(model_to_json(model))
        np.testing.assert_array_equal(predict_scores(back, X), predict_scores(model, X))
        assert back.params == model.params

    def test_unknown_param(self):
        with pytest.raises(ValueError, match="unknown"):
            validate_params("LR", {"gamma": 1})

    def test_out_of_range_param(self):
        with pytest.raises(ValueError):
            validate_params("RF", {"n_trees": 0})
        with pytest.raises(ValueError):
            validate_params("RF", {"n_trees": 2.5})

    def test_defaults_filled(self):
        p = validate_params("GBT", None)
        assert set(p) == set(boosting.PARAMS)

    def test_single_class_rejected(self):
        X, _ = toy(n=20)
        with pytest.raises(FitError):
            fit("LR", {}, X, np.ones(20))

    def test_non_finite_rejected(self):
        X, y = toy(n=20)
        X[0, 0] = np.inf
        with pytest.raises(FitError):
            fit("LR", {}, X, y)

    def test_column_mismatch_on_predict(self):
        X, y = toy(n=50)
        model = fit("LR", {}, X, y)
        with pytest.raises(FitError):
            predict_scores(model, X[:, :3])

    def test_registry_names(self):
        assert get_learner("XGBoost").name == "GBT"
        assert [get_learner(k).name for k in ALL_KINDS] == ["LR", "SVM", "RF", "ANN", "GBT", "SBEL"]
        with pytest.raises(ValueError):
            get_learner("KNN")


class TestLogistic:
    def test_converges_on_separable_direction(self):
        X, y = toy(n=500, seed=3)
        w, b, ok = logistic.newton_fit(X, y.astype(float), C=1.0)
        assert ok
        _, gw, gb = logistic.objective(w, b, X, y.astype(float), 1.0)
        assert np.max(np.abs(gw)) < 1e-4 and abs(gb) < 1e-4
        assert w[0] > 1.0 and w[1] < -1.0

    def test_strong_penalty_shrinks(self):
        X, y = toy(n=300)
        w_small, *_ = logistic.newton_fit(X, y.astype(float), C=1e-4)
        w_big, *_ = logistic.newton_fit(X, y.astype(float), C=10.0)
        assert np.linalg.norm(w_small) < np.linalg.norm(w_big)


class TestTrees:
    def test_single_tree_fits_training_data(self):
        X, y = toy(n=200)
        tree = fit_tree(X, y, max_depth=64, min_leaf=1)
        # distinct rows, unlimited depth: training labels reproduced
        np.testing.assert_array_equal(tree_labels(tree, X), y)

    def test_depth_one_is_a_stump(self):
        X, y = toy(n=200)
        tree = fit_tree(X, y, max_depth=1)
        assert len(np.unique(tree.predict_sum(X, vote=False))) <= 2

    def test_forest_of_one_equals_tree(self):
        X, y = toy(n=150)
        rf = fit("RF", {"n_trees": 1, "bootstrap": False, "max_features": 1.0, "max_depth": 6}, X, y, seed=3)
        tree = fit_tree(X, y, max_depth=6)
        np.testing.assert_array_equal(predict_scores(rf, X), tree_labels(tree, X).astype(float))

    def test_bins_split_between_values(self):
        X = np.array([[0.0], [1.0], [2.0], [2.0]])
        b = make_bins(X)
        np.testing.assert_allclose(b.cuts[0], [0.5, 1.5])

    def test_rf_scores_are_vote_fractions(self):
        X, y = toy(n=120)
        model = fit("RF", {"n_trees": 8}, X, y, seed=0)
        s = predict_scores(model, X)
        np.testing.assert_allclose(s * 8, np.round(s * 8), atol=1e-12)


class TestBoosting:
    def test_training_loss_decreases(self):
        X, y = toy(n=300)
        model = fit("GBT", {"rounds": 30, "learning_rate": 0.1}, X, y, seed=0)
        loss = np.asarray(model.state["train_loss"])
        assert loss[-1] < loss[0]
        assert np.all(np.diff(loss) <= 1e-12)

    def test_initial_margin_is_log_odds(self):
        X, y = toy(n=200)
        model = fit("GBT", {"rounds": 1}, X, y)
        p = y.mean()
        assert model.state["base"] == pytest.approx(np.log(p / (1 - p)))


class TestNeural:
    def test_training_reduces_loss(self):
        X, y = toy(n=300)
        w0 = neural.init_weights(6, 16, np.random.default_rng(0))
        before = neural.loss_and_grad(w0, X, y.astype(float), 0.0)[0]
        model = fit("ANN", {"hidden_units": 16, "epochs": 30}, X, y, seed=0)
        after = neural.loss_and_grad(model.state, X, y.astype(float), 0.0)[0]
        assert after < before


def _stub(name, fn):
    return Learner(name=name, fit=lambda X, y, p, s: None, scores=lambda st, X: fn(X), params={})


class TestStacking:
    def test_leakage_audit_passes(self):
        X, y = toy(n=200)
        model = fit_stacked({k: FAST[k] for k in FAST}, {"C": 1.0}, X, y, k=5, seed=0)
        assert leakage_audit(model)
        assert model.state["stage"].meta_features.shape == (200, 5)
        assert auc_score(y, predict_scores(model, X)) > 0.75

    def test_perfect_base_gets_weight(self):
        X, y = toy(n=200)
        X = np.column_stack([X, y + 0.01 * np.random.default_rng(0).normal(size=200)])
        oracle = _stub("oracle", lambda Z: Z[:, -1])
        noise = _stub("noise", lambda Z: np.sin(1e3 * Z[:, 2]) * 0.5 + 0.5)
        model = fit_stacked({}, {"C": 10.0}, X, y, k=5, base_learners=[oracle, noise])
        coef = model.state["coef"]
        assert coef[0] > 5 * abs(coef[1])
        assert auc_score(y, predict_scores(model, X)) == 1.0

    def test_sbel_through_registry(self):
        X, y = toy(n=150)
        params = {"C": 1.0, **{k: FAST[k] for k in FAST}}
        a = fit(LearnerKind.SBEL, params, X, y, seed=4)
        b = fit(LearnerKind.SBEL, params, X, y, seed=4)
        np.testing.assert_array_equal(predict_scores(a, X), predict_scores(b, X))
        back = model_from_json(model_to_json(a))
        np.testing.assert_array_equal(predict_scores(back, X), predict_scores(a, X))
        assert json.loads(model_to_json(a))["format_version"] == 1

    def test_too_few_rows(self):
        X, y = toy(n=8)
        with pytest.raises(FitError):
            fit_stacked({k: FAST[k] for k in FAST}, None, X, y, k=5)
