import numpy as np
import pytest

from anomalens.datagen import EventLabel
from anomalens.errors import DataError
from anomalens.evaluation import (
    EventWindowConfig,
    event_tpr_fpr,
    roc_auc,
    threshold_for_fpr,
)
from anomalens.rng import PortableRng, derive_seed


def pairwise_auc(scores, labels):
    """Rank estimator: P(anom > norm) + 0.5 P(anom == norm)."""
    s = np.asarray(scores, float)
    y = np.asarray(labels, bool)
    pos = s[y][:, None]
    neg = s[~y][None, :]
    return (np.mean(pos > neg) + 0.5 * np.mean(pos == neg))


class TestRocAuc:
    def test_perfect_separation(self):
        curve = roc_auc([0.1, 0.2, 0.9, 0.8], [False, False, True, True])
        assert curve.auroc == 1.0

    def test_perfectly_wrong(self):
        curve = roc_auc([0.9, 0.8, 0.1, 0.2], [False, False, True, True])
        assert curve.auroc == 0.0

    def test_all_tied_gives_half(self):
        curve = roc_auc([3.0] * 6, [True, False, True, False, False, True])
        assert curve.auroc == pytest.approx(0.5, abs=1e-15)

    def test_anchored_at_corners(self):
        curve = roc_auc([1.0, 2.0, 3.0], [False, True, False])
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_sweep_is_monotone(self):
        rng = PortableRng(derive_seed(0, 1))
        scores = rng.normal(0, 1, 300)
        labels = rng.uniform(0, 1, 300) < 0.3
        labels[0] = True
        labels[1] = False
        curve = roc_auc(scores, labels)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    def test_matches_pairwise_oracle(self):
        for trial in range(25):
            rng = PortableRng(derive_seed(7, trial))
            n = int(50 + rng.integer_below(950))
            # draw from a coarse grid so ties are common
            scores = np.round(rng.normal(0, 1, n) * 4) / 4
            labels = rng.uniform(0, 1, n) < 0.4
            labels[0] = True
            labels[1] = False
            curve = roc_auc(scores, labels)
            assert abs(curve.auroc - pairwise_auc(scores, labels)) <= 1e-10

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc([1.0, 2.0], [True, True])
        with pytest.raises(DataError):
            roc_auc([1.0, 2.0], [False, False])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            roc_auc([1.0, 2.0], [True])

    def test_curve_length_follows_unique_scores(self):
        curve = roc_auc([1.0, 1.0, 2.0, 3.0], [False, True, False, True])
        assert len(curve.fpr) == 3 + 1  # one per distinct score plus the origin


class TestEventTprFpr:
    def test_spike_inside_window_detected(self):
        scores = [0.0, 0.0, 10.0, 0.0, 0.0]
        res = event_tpr_fpr(scores, 5.0, [EventLabel(2, (), "fault", "")], EventWindowConfig(window=0))
        assert res.tpr == 1.0 and res.fpr == 0.0
        assert res.detected == 1 and res.n_events == 1
        assert not res.vacuous_tpr

    def test_spike_outside_window_is_false_positive(self):
        scores = [0.0, 10.0, 0.0, 0.0, 0.0, 0.0]
        res = event_tpr_fpr(scores, 5.0, [4], EventWindowConfig(window=1))
        assert res.tpr == 0.0
        assert res.n_normal_bins == 3  # bins 0,1,2; window covers 3,4,5
        assert res.fpr == pytest.approx(1.0 / 3.0)

    def test_window_reaches_plus_minus(self):
        scores = [0.0, 0.0, 0.0, 0.0, 9.0]
        res = event_tpr_fpr(scores, 5.0, [2], EventWindowConfig(window=2))
        assert res.tpr == 1.0

    def test_zero_events_vacuous(self):
        res = event_tpr_fpr([0.0, 1.0, 0.0], 5.0, [])
        assert res.tpr == 1.0 and res.vacuous_tpr
        assert res.fpr == 0.0

    def test_threshold_below_everything(self):
        res = event_tpr_fpr([1.0, 2.0, 3.0], 0.5, [])
        assert res.fpr == 1.0

    def test_boundary_score_does_not_fire(self):
        res = event_tpr_fpr([2.0, 2.0], 2.0, [])
        assert res.fpr == 0.0

    def test_excluded_spans_leave_denominator(self):
        scores = [9.0, 9.0, 0.0, 0.0]
        res = event_tpr_fpr(scores, 5.0, [], EventWindowConfig(window=0, excluded=((0, 1),)))
        assert res.n_normal_bins == 2
        assert res.fpr == 0.0

    def test_fpr_ignores_scores_inside_windows(self):
        base = np.zeros(30)
        base[10] = 50.0
        res_a = event_tpr_fpr(base, 5.0, [10], EventWindowConfig(window=2))
        spiked = base.copy()
        spiked[9] = 99.0  # still inside the window
        res_b = event_tpr_fpr(spiked, 5.0, [10], EventWindowConfig(window=2))
        assert res_a.fpr == res_b.fpr == 0.0

    def test_tpr_ignores_permutations_outside_windows(self):
        rng = PortableRng(derive_seed(1, 2))
        scores = rng.uniform(0, 1, 40)
        scores[20] = 9.0
        res_a = event_tpr_fpr(scores, 5.0, [20], EventWindowConfig(window=1))
        shuffled = scores.copy()
        outside = np.r_[0:19, 22:40]
        shuffled[outside] = scores[outside][rng.permutation(len(outside))]
        res_b = event_tpr_fpr(shuffled, 5.0, [20], EventWindowConfig(window=1))
        assert res_a.tpr == res_b.tpr

    def test_everything_in_window_vacuous_fpr(self):
        res = event_tpr_fpr([9.0, 9.0, 9.0], 5.0, [1], EventWindowConfig(window=3))
        assert res.vacuous_fpr and res.fpr == 0.0

    def test_bad_event_index_rejected(self):
        with pytest.raises(DataError):
            event_tpr_fpr([1.0, 2.0], 0.0, [5])

    def test_reversed_span_rejected(self):
        with pytest.raises(DataError):
            EventWindowConfig(excluded=((4, 2),))


class TestThresholdForFpr:
    def test_target_zero_is_above_max(self):
        scores = [1.0, 5.0, 3.0]
        thr = threshold_for_fpr(scores, 0.0)
        assert thr > 5.0
        assert thr == np.nextafter(5.0, np.inf)
        assert np.sum(np.asarray(scores) > thr) == 0

    def test_target_one_lets_everything_fire(self):
        thr = threshold_for_fpr([1.0, 2.0], 1.0)
        assert thr == float("-inf")
        assert np.all(np.asarray([1.0, 2.0]) > thr)

    def test_thousand_unique_scores_hits_970th(self):
        rng = PortableRng(derive_seed(2, 3))
        scores = np.unique(rng.normal(0, 1, 1100))[:1000]
        assert scores.size == 1000
        thr = threshold_for_fpr(scores, 0.03)
        assert thr == np.sort(scores)[969]  # 970th order statistic, 1-based

    def test_exceedance_never_beats_target(self):
        for trial in range(40):
            rng = PortableRng(derive_seed(3, trial))
            n = int(5 + rng.integer_below(200))
            scores = np.round(rng.normal(0, 1, n) * 2) / 2  # ties likely
            target = float(rng.uniform(0, 1, 1)[0])
            thr = threshold_for_fpr(scores, target)
            frac = np.mean(scores > thr)
            assert frac <= target + 1e-15

    def test_threshold_is_minimal_when_some_bins_may_fire(self):
        for trial in range(40):
            rng = PortableRng(derive_seed(4, trial))
            n = int(5 + rng.integer_below(200))
            scores = np.round(rng.normal(0, 1, n) * 2) / 2
            target = float(rng.uniform(0, 1, 1)[0])
            k = int(np.floor(target * n))
            if k < 1 or k >= n:
                continue
            thr = threshold_for_fpr(scores, target)
            just_below = np.nextafter(thr, -np.inf)
            assert np.mean(scores > just_below) > target

    def test_bad_target_rejected(self):
        with pytest.raises(DataError):
            threshold_for_fpr([1.0], 1.5)
        with pytest.raises(DataError):
            threshold_for_fpr([], 0.5)
