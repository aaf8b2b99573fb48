import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from videossl.errors import MetricError
from videossl.metrics import confusion_metrics, roc_auc


def brute_force_auc(scores, labels):
    """Pair-enumeration oracle: wins + half-ties over all pos/neg pairs."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else (0.5 if p == n else 0.0)
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_perfect_separation(self):
        m = confusion_metrics([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
        assert m == {"accuracy": 1.0, "sensitivity": 1.0, "specificity": 1.0}

    def test_degenerate_predictor(self):
        m = confusion_metrics([1.0, 1.0, 1.0, 1.0], [1, 1, 0, 0])
        assert m["accuracy"] == 0.5
        assert m["sensitivity"] == 1.0
        assert m["specificity"] == 0.0

    def test_hand_confusion_table(self):
        # (0.9,1)=TP, (0.2,0)=TN, (0.6,0)=FP, (0.4,1)=FN at threshold 0.5
        m = confusion_metrics([0.9, 0.2, 0.6, 0.4], [1, 0, 0, 1])
        assert m["accuracy"] == pytest.approx(0.5, abs=1e-9)
        assert m["sensitivity"] == pytest.approx(0.5, abs=1e-9)
        assert m["specificity"] == pytest.approx(0.5, abs=1e-9)

    def test_hand_confusion_table_high_threshold(self):
        # same scores at threshold 0.7: TP=1, FN=1, TN=2, FP=0
        m = confusion_metrics([0.9, 0.2, 0.6, 0.4], [1, 0, 0, 1], threshold=0.7)
        assert m["accuracy"] == pytest.approx(0.75, abs=1e-9)
        assert m["sensitivity"] == pytest.approx(0.5, abs=1e-9)
        assert m["specificity"] == pytest.approx(1.0, abs=1e-9)

    def test_single_class_raises(self):
        with pytest.raises(MetricError):
            confusion_metrics([0.5, 0.6], [1, 1])

    def test_accuracy_decomposition(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(4, 30))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                continue
            scores = rng.random(n)
            m = confusion_metrics(scores, labels)
            p, q = int(labels.sum()), int(n - labels.sum())
            assert m["accuracy"] == pytest.approx(
                (m["sensitivity"] * p + m["specificity"] * q) / n, abs=1e-12)


class TestAuc:
    def test_perfect(self):
        assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_hand_enumeration(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75, abs=1e-12)

    def test_single_class_raises(self):
        with pytest.raises(MetricError):
            roc_auc([0.1, 0.2], [0, 0])

    def test_matches_oracle_exhaustively(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(2, 13))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 1)  # force frequent ties
            assert roc_auc(scores, labels) == pytest.approx(
                brute_force_auc(scores, labels), abs=1e-12)

    @settings(deadline=None)
    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=4, max_size=12),
           st.randoms())
    def test_monotone_transform_invariance(self, scores, rnd):
        labels = [rnd.randint(0, 1) for _ in scores]
        if len(set(labels)) < 2:
            labels[0], labels[1] = 0, 1
        transformed = [np.tanh(3 * s) + s for s in scores]
        assert roc_auc(scores, labels) == pytest.approx(
            roc_auc(transformed, labels), abs=1e-12)

    def test_complement_symmetry(self):
        rng = np.random.default_rng(2)
        scores = rng.random(20)
        labels = rng.integers(0, 2, 20)
        labels[0], labels[1] = 0, 1
        flipped = 1 - labels
        assert roc_auc(scores, labels) == pytest.approx(
            roc_auc([-s for s in scores], flipped), abs=1e-12)
