import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subsetforge.metrics import (
    ConfusionMatrix,
    MetricsBundle,
    auc_score,
    average_ranks,
    classification_metrics,
    confusion_matrix,
    evaluate,
    roc_auc,
    roc_curve,
    spearman,
)


def brute_auc(y, s):
    pos = s[y == 1]
    neg = s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (pos.size * neg.size)


class TestConfusionMatrix:
    def test_counts(self):
        cm = confusion_matrix([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (2, 1, 1, 1)
        assert cm.total == 5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_matrix([1, 0], [1])

    def test_empty(self):
        with pytest.raises(ValueError):
            confusion_matrix([], [])

    def test_non_binary(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 2], [0, 1])


class TestClassificationMetrics:
    def test_worked_example(self):
        m = classification_metrics(ConfusionMatrix(tp=40, tn=45, fp=5, fn=10))
        assert m.accuracy == pytest.approx(0.85)
        assert m.precision == pytest.approx(40 / 45)
        assert m.recall == pytest.approx(0.8)
        assert m.far == pytest.approx(0.1)
        assert m.f1 == pytest.approx(2 * (40 / 45) * 0.8 / (40 / 45 + 0.8))

    def test_no_predicted_positives(self):
        m = classification_metrics(ConfusionMatrix(tp=0, tn=7, fp=0, fn=3))
        assert m.far == 1.0
        assert m.precision == 0.0
        assert m.f1 == 0.0

    def test_no_actual_positives(self):
        m = classification_metrics(ConfusionMatrix(tp=0, tn=3, fp=2, fn=0))
        assert m.recall == 0.0
        assert m.far == pytest.approx(0.4)

    def test_empty_matrix(self):
        with pytest.raises(ValueError):
            classification_metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_bundle_round_trip(self):
        m = classification_metrics(ConfusionMatrix(3, 4, 1, 2), auc=0.75)
        assert MetricsBundle.from_dict(m.to_dict()) == m

    def test_small_exhaustive_ranges(self):
        for tp, tn, fp, fn in itertools.product(range(4), repeat=4):
            if tp + tn + fp + fn == 0:
                continue
            m = classification_metrics(ConfusionMatrix(tp, tn, fp, fn))
            for v in (m.accuracy, m.precision, m.recall, m.f1, m.far):
                assert 0.0 <= v <= 1.0


class TestRanks:
    def test_ties_get_average(self):
        np.testing.assert_array_equal(average_ranks([10, 20, 20, 5]), [2, 3.5, 3.5, 1])

    def test_rank_sum(self):
        x = np.random.default_rng(0).integers(0, 5, 50)
        assert average_ranks(x).sum() == pytest.approx(50 * 51 / 2)


class TestAuc:
    def test_perfect_and_reversed(self):
        y = np.array([0, 0, 1, 1])
        assert auc_score(y, [0.1, 0.2, 0.8, 0.9]) == 1.0
        assert auc_score(y, [0.9, 0.8, 0.2, 0.1]) == 0.0

    def test_all_tied_scores(self):
        assert auc_score([0, 1, 0, 1], [0.5] * 4) == 0.5

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            auc_score([1, 1, 1], [0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            roc_curve([0, 0], [0.1, 0.2])

    def test_roc_endpoints(self):
        curve = roc_curve([0, 1, 0, 1, 1], [0.3, 0.8, 0.3, 0.3, 0.1])
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)
        assert np.all(np.diff(curve.far) >= 0) and np.all(np.diff(curve.recall) >= 0)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 6)), min_size=2, max_size=40))
    def test_matches_pairwise_oracle(self, pairs):
        y = np.array([p[0] for p in pairs])
        s = np.array([p[1] for p in pairs], dtype=float)
        if y.min() == y.max():
            return
        curve, a = roc_auc(y, s)
        assert a == pytest.approx(brute_auc(y, s), abs=1e-12)
        assert curve.trapezoid_area() == pytest.approx(a, abs=1e-12)

    def test_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 2, 100)
        s = rng.normal(size=100)
        assert auc_score(y, s) == pytest.approx(auc_score(y, np.exp(3 * s)))


class TestSpearman:
    def test_perfect_monotone(self):
        x = np.arange(10.0)
        assert spearman(x, x ** 3) == pytest.approx(1.0)
        assert spearman(x, -x) == pytest.approx(-1.0)

    def test_binary_target(self):
        y = np.array([0, 0, 1, 1])
        assert spearman(y, y) == pytest.approx(1.0)

    def test_constant_raises(self):
        with pytest.raises(ValueError):
            spearman([1, 1, 1], [0, 1, 2])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=30))
    def test_symmetric_and_bounded(self, pairs):
        x = np.array([p[0] for p in pairs], float)
        y = np.array([p[1] for p in pairs], float)
        if x.min() == x.max() or y.min() == y.max():
            return
        r = spearman(x, y)
        assert -1.0 <= r <= 1.0
        assert r == pytest.approx(spearman(y, x), abs=1e-14)


class TestEvaluate:
    def test_bundle_with_auc(self):
        m = evaluate([0, 1, 1, 0], [0.2, 0.9, 0.6, 0.4], [0, 1, 1, 0])
        assert m.auc == 1.0 and m.accuracy == 1.0 and m.far == 0.0

    def test_single_class_actuals_omit_auc(self):
        m = evaluate([1, 1], [0.2, 0.9], [0, 1])
        assert m.auc is None
