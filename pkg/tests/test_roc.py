"""Unit and oracle tests for ROC construction, AUC, and direction handling."""

from __future__ import annotations

import numpy as np
import pytest

from optcut.errors import DataError
from optcut.roc import (
    Direction,
    Sample,
    auc,
    build_roc,
    classify_counts,
    detect_direction_and_classes,
    midpoint_cutpoint,
)


def tally_oracle(x, y, direction):
    """O(n^2) per-threshold tally: candidate grid is sentinel + unique values."""
    uniq = np.unique(x)
    if direction is Direction.GE:
        cuts = [np.inf] + list(uniq[::-1])
    else:
        cuts = [-np.inf] + list(uniq)
    rows = []
    for c in cuts:
        pred = x >= c if direction is Direction.GE else x <= c
        tp = int(np.sum(pred & y))
        fp = int(np.sum(pred & ~y))
        rows.append((c, tp, fp))
    return rows


def pairwise_auc(x, y, direction):
    """Mann-Whitney with half credit for ties, O(n_pos * n_neg)."""
    xp, xn = x[y], x[~y]
    diff = xp[:, None] - xn[None, :]
    if direction is Direction.LE:
        diff = -diff
    wins = (diff > 0).sum() + 0.5 * (diff == 0).sum()
    return wins / (xp.size * xn.size)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_sample(rng, n, tie_heavy=False):
    x = rng.integers(0, 8, n).astype(float) if tie_heavy else rng.normal(size=n)
    y = rng.random(n) < 0.4
    if y.all() or not y.any():
        y[0] = ~y[0]
    return Sample(x, y, pos_class="yes", neg_class="no")


class TestBuildRoc:
    @pytest.mark.parametrize("direction", [Direction.GE, Direction.LE])
    @pytest.mark.parametrize("tie_heavy", [False, True])
    @pytest.mark.parametrize("n", [2, 5, 20, 83])
    def test_matches_tally_oracle(self, rng, n, tie_heavy, direction):
        for _ in range(10):
            sample = random_sample(rng, n, tie_heavy)
            curve = build_roc(sample, direction)
            expected = tally_oracle(sample.x, sample.y, direction)
            assert len(curve) == len(expected)
            for i, (c, tp, fp) in enumerate(expected):
                assert curve.cutpoints[i] == c
                assert curve.tp[i] == tp, f"tp mismatch at cutpoint {c}"
                assert curve.fp[i] == fp, f"fp mismatch at cutpoint {c}"

    def test_point_count_is_unique_values_plus_sentinel(self, rng):
        x = np.repeat(np.arange(12.0), 5)
        y = np.zeros(60, bool)
        y[-10:] = True
        curve = build_roc(Sample(x, y, 1, 0), Direction.GE)
        assert len(curve) == 13

    def test_sentinel_classifies_all_negative(self, rng):
        sample = random_sample(rng, 40)
        for direction in Direction:
            curve = build_roc(sample, direction)
            assert curve.cutpoints[0] == direction.sentinel
            assert curve.tp[0] == 0 and curve.fp[0] == 0

    def test_traversal_ends_all_positive(self, rng):
        sample = random_sample(rng, 40, tie_heavy=True)
        curve = build_roc(sample, Direction.GE)
        assert curve.tpr[-1] == 1.0 and curve.fpr[-1] == 1.0

    def test_perfect_separation_contains_ideal_point(self):
        x = np.array([0.0, 0, 0, 1, 1])
        y = np.array([False, False, False, True, True])
        curve = build_roc(Sample(x, y, 1, 0), Direction.GE)
        ideal = (curve.fpr == 0) & (curve.tpr == 1)
        assert ideal.any()

    def test_rates_monotone_along_traversal(self, rng):
        sample = random_sample(rng, 200, tie_heavy=True)
        for direction in Direction:
            curve = build_roc(sample, direction)
            assert (np.diff(curve.tpr) >= 0).all()
            assert (np.diff(curve.fpr) >= 0).all()

    def test_margins_constant(self, rng):
        sample = random_sample(rng, 57)
        curve = build_roc(sample, Direction.GE)
        assert (curve.tp + curve.fn == sample.n_pos).all()
        assert (curve.fp + curve.tn == sample.n_neg).all()

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="degenerate classes"):
            Sample(np.arange(5.0), np.ones(5, bool), 1, 0)

    def test_empty_rejected(self):
        with pytest.raises(DataError, match="empty"):
            Sample(np.array([]), np.array([], bool), 1, 0)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            Sample(np.array([1.0, np.nan, 3.0]), np.array([1, 0, 1], bool), 1, 0)

    def test_direction_duality(self, rng):
        """Negating the predictor and flipping direction gives the same counts."""
        sample = random_sample(rng, 60, tie_heavy=True)
        ge = build_roc(sample, Direction.GE)
        neg = Sample(-sample.x, sample.y, sample.pos_class, sample.neg_class)
        le = build_roc(neg, Direction.LE)
        np.testing.assert_array_equal(ge.tp, le.tp)
        np.testing.assert_array_equal(ge.fp, le.fp)
        np.testing.assert_array_equal(ge.cutpoints[1:], -le.cutpoints[1:])


class TestThresholdIndex:
    @pytest.mark.parametrize("direction", [Direction.GE, Direction.LE])
    def test_matches_direct_classification(self, rng, direction):
        sample = random_sample(rng, 50, tie_heavy=True)
        curve = build_roc(sample, direction)
        thresholds = np.concatenate([
            np.unique(sample.x),
            rng.uniform(-2, 9, 40),
            [direction.sentinel, -100.0, 100.0],
        ])
        for t in thresholds:
            i = curve.threshold_index(t)
            direct = classify_counts(sample, t, direction)
            assert curve.counts_at(i) == direct, f"threshold {t}"


class TestAuc:
    @pytest.mark.parametrize("direction", [Direction.GE, Direction.LE])
    @pytest.mark.parametrize("tie_heavy", [False, True])
    def test_matches_pairwise_oracle(self, rng, tie_heavy, direction):
        for _ in range(20):
            sample = random_sample(rng, 30, tie_heavy)
            got = auc(build_roc(sample, direction))
            want = pairwise_auc(sample.x, sample.y, direction)
            assert got == pytest.approx(want, abs=1e-12)

    def test_constant_predictor_is_half(self):
        sample = Sample(np.ones(10), np.arange(10) < 4, 1, 0)
        assert auc(build_roc(sample, Direction.GE)) == pytest.approx(0.5)

    def test_perfect_separation_is_one(self):
        x = np.array([0.0, 0, 1, 1])
        y = np.array([False, False, True, True])
        assert auc(build_roc(Sample(x, y, 1, 0), Direction.GE)) == pytest.approx(1.0)

    def test_monotone_transform_invariance(self, rng):
        sample = random_sample(rng, 80, tie_heavy=True)
        base = auc(build_roc(sample, Direction.GE))
        warped = Sample(np.exp(sample.x / 3), sample.y, 1, 0)
        assert auc(build_roc(warped, Direction.GE)) == pytest.approx(base, abs=1e-12)


class TestDetectDirectionAndClasses:
    def test_higher_median_class_becomes_positive_ge(self, rng):
        x = np.concatenate([rng.normal(0, 1, 100), rng.normal(3, 1, 50)])
        labels = np.array(["ctrl"] * 100 + ["case"] * 50)
        res = detect_direction_and_classes(x, labels)
        assert res.direction is Direction.GE
        assert res.pos_class == "case" and res.neg_class == "ctrl"
        assert res.direction_source == "detected" and res.class_source == "detected"

    def test_label_order_independent(self, rng):
        x = np.concatenate([rng.normal(0, 1, 100), rng.normal(3, 1, 50)])
        labels = np.array(["ctrl"] * 100 + ["case"] * 50)
        perm = rng.permutation(x.size)
        a = detect_direction_and_classes(x, labels)
        b = detect_direction_and_classes(x[perm], labels[perm])
        assert (a.direction, a.pos_class, a.neg_class) == (b.direction, b.pos_class, b.neg_class)

    def test_hinted_positive_with_lower_median_gives_le(self, rng):
        x = np.concatenate([rng.normal(0, 1, 100), rng.normal(-3, 1, 100)])
        labels = np.array(["neg"] * 100 + ["pos"] * 100)
        res = detect_direction_and_classes(x, labels, pos_class="pos")
        assert res.direction is Direction.LE
        assert (res.pos_class, res.neg_class) == ("pos", "neg")
        assert res.class_source == "hinted" and res.direction_source == "detected"

    def test_hinted_direction_picks_fitting_classes(self, rng):
        x = np.concatenate([rng.normal(0, 1, 80), rng.normal(4, 1, 80)])
        labels = np.array(["a"] * 80 + ["b"] * 80)
        res = detect_direction_and_classes(x, labels, direction=Direction.LE)
        assert res.pos_class == "a" and res.neg_class == "b"
        assert res.direction_source == "hinted"

    def test_full_hints_skip_median_comparison(self):
        x = np.array([1.0, 1.0, 1.0, 1.0])
        labels = np.array(["a", "a", "b", "b"])
        res = detect_direction_and_classes(
            x, labels, pos_class="b", direction=Direction.GE
        )
        assert res.pos_class == "b" and res.direction is Direction.GE

    def test_equal_medians_without_hints_error(self):
        x = np.array([1.0, 2.0, 3.0, 1.0, 2.0, 3.0])
        labels = np.array(["a", "a", "a", "b", "b", "b"])
        with pytest.raises(DataError, match="ambiguous direction"):
            detect_direction_and_classes(x, labels)

    def test_hint_for_absent_label_error(self):
        x = np.array([1.0, 2.0])
        labels = np.array(["a", "b"])
        with pytest.raises(DataError, match="not present"):
            detect_direction_and_classes(x, labels, pos_class="c")

    def test_three_classes_error(self):
        x = np.arange(3.0)
        labels = np.array(["a", "b", "c"])
        with pytest.raises(DataError, match="exactly two"):
            detect_direction_and_classes(x, labels)


class TestMidpointCutpoint:
    @pytest.fixture
    def sample(self):
        x = np.array([1.0, 2.0, 4.0, 1.0, 2.0, 4.0])
        y = np.array([0, 0, 1, 0, 1, 1], bool)
        return Sample(x, y, 1, 0)

    def test_ge_averages_with_next_lower(self, sample):
        assert midpoint_cutpoint(2.0, sample, Direction.GE) == 1.5

    def test_le_averages_with_next_higher(self, sample):
        assert midpoint_cutpoint(2.0, sample, Direction.LE) == 3.0

    def test_ge_at_minimum_unchanged(self, sample):
        assert midpoint_cutpoint(1.0, sample, Direction.GE) == 1.0

    def test_le_at_maximum_unchanged(self, sample):
        assert midpoint_cutpoint(4.0, sample, Direction.LE) == 4.0

    def test_unobserved_value_rejected(self, sample):
        with pytest.raises(ValueError, match="candidate set"):
            midpoint_cutpoint(3.0, sample, Direction.GE)

    @pytest.mark.parametrize("direction", [Direction.GE, Direction.LE])
    def test_classification_equivalence(self, rng, direction):
        """Moving to the midpoint never changes the in-sample confusion counts."""
        for _ in range(25):
            sample = random_sample(rng, 40, tie_heavy=True)
            for c in np.unique(sample.x):
                mid = midpoint_cutpoint(float(c), sample, direction)
                assert classify_counts(sample, mid, direction) == classify_counts(
                    sample, float(c), direction
                ), f"counts changed at {c} -> {mid}"
