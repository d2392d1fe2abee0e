import math

import numpy as np
import pytest

from trackselect.geometry import BBox
from trackselect.metrics import (
    BadInterval,
    EmptyInput,
    LengthMismatch,
    MetricReport,
    NoScoredFrames,
    aggregate_report,
    average_overlap,
    frame_scores,
    metric_kernel,
    norm_precision,
    overlap_series,
    precision_at,
    sequence_metrics,
    simplified_eao,
    success_auc,
    success_rate,
    top1_accuracy,
)

from oracles import brute_average_overlap, brute_norm_precision, brute_success_auc

B = BBox


def perfect(n, box=B(0, 0, 10, 10)):
    return tuple(box for _ in range(n))


SEVENTH_PAIR = (B(0, 0, 2, 2), B(1, 1, 2, 2))  # iou exactly 1/7


class TestOverlapSeries:
    def test_perfect(self):
        gt = perfect(4)
        assert overlap_series(gt, gt) == [1.0, 1.0, 1.0]

    def test_all_absent_prediction(self):
        gt = perfect(4)
        pred = (gt[0], None, None, None)
        assert overlap_series(pred, gt) == [0.0, 0.0, 0.0]

    def test_half_overlap_toy(self):
        gt = (B(0, 0, 2, 2), B(0, 0, 2, 2), SEVENTH_PAIR[1])
        pred = (B(0, 0, 2, 2), B(0, 0, 2, 2), SEVENTH_PAIR[0])
        series = overlap_series(pred, gt)
        assert series[0] == 1.0
        assert series[1] == pytest.approx(1 / 7, abs=1e-15)

    def test_absent_gt_skipped(self):
        gt = (B(0, 0, 2, 2), None, B(0, 0, 2, 2))
        pred = perfect(3, B(0, 0, 2, 2))
        assert overlap_series(pred, gt) == [1.0]

    def test_zero_area_gt_skipped(self):
        gt = (B(0, 0, 2, 2), B(0, 0, 0, 0), B(0, 0, 2, 2))
        pred = perfect(3, B(0, 0, 2, 2))
        assert overlap_series(pred, gt) == [1.0]

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            overlap_series(perfect(3), perfect(4))

    def test_no_scored_frames(self):
        gt = (B(0, 0, 2, 2), None, None)
        with pytest.raises(NoScoredFrames):
            overlap_series(perfect(3), gt)


class TestSuccessAuc:
    def test_perfect_is_50_51(self):
        gt = perfect(5)
        assert success_auc(gt, gt) == pytest.approx(50 / 51, abs=1e-15)

    def test_all_absent_is_zero(self):
        gt = perfect(5)
        pred = (gt[0],) + (None,) * 4
        assert success_auc(pred, gt) == 0.0

    def test_mixed_two_frames(self):
        # frames with iou 1.0 and 0.5 -> mean of (50/51, 25/51) = 75/102
        gt = (B(0, 0, 2, 2), B(0, 0, 2, 2), B(0, 0, 2, 4))
        pred = (B(0, 0, 2, 2), B(0, 0, 2, 2), B(0, 0, 2, 2))
        assert success_auc(pred, gt) == pytest.approx(75 / 102, abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            m = int(rng.integers(3, 30))
            gt, pred = _random_pair(rng, m)
            got = success_auc(pred, gt)
            want = brute_success_auc(_as_tuples(pred), _as_tuples(gt))
            assert got == pytest.approx(want, abs=1e-12)


class TestPrecision:
    def test_perfect(self):
        gt = perfect(4)
        assert precision_at(gt, gt) == 1.0

    def test_constant_25px_offset(self):
        gt = perfect(4)
        pred = tuple(B(b.x + 25, b.y, b.w, b.h) for b in gt)
        assert precision_at(pred, gt, tau_px=20) == 0.0

    def test_half_within(self):
        gt = perfect(5)
        pred = (gt[0], B(5, 0, 10, 10), B(5, 0, 10, 10), B(30, 0, 10, 10), B(30, 0, 10, 10))
        assert precision_at(pred, gt, tau_px=20) == 0.5


class TestNormPrecision:
    def test_perfect(self):
        gt = perfect(4)
        assert norm_precision(gt, gt) == 1.0

    def test_error_beyond_max_threshold(self):
        gt = perfect(4)
        pred = tuple(B(b.x + 6, b.y, b.w, b.h) for b in gt)  # norm error 0.6
        assert norm_precision(pred, gt) == 0.0

    def test_quarter_error(self):
        # norm error exactly 0.25 -> thresholds 0.25..0.50 pass: 26/51
        gt = perfect(4)
        pred = tuple(B(b.x + 2.5, b.y, b.w, b.h) for b in gt)
        assert norm_precision(pred, gt) == pytest.approx(26 / 51, abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            gt, pred = _random_pair(rng, int(rng.integers(3, 30)))
            got = norm_precision(pred, gt)
            want = brute_norm_precision(_as_tuples(pred), _as_tuples(gt))
            assert got == pytest.approx(want, abs=1e-12)


class TestAoAndSuccessRate:
    def test_perfect(self):
        gt = perfect(4)
        assert average_overlap(gt, gt) == 1.0
        assert success_rate(gt, gt, 0.5) == 1.0
        assert success_rate(gt, gt, 0.75) == 1.0

    def test_counting(self):
        # overlaps [1.0, 0.6, 0.2] by construction
        gt = (
            B(0, 0, 10, 10),
            B(0, 0, 10, 10),
            B(0, 0, 10, 15),
            B(0, 0, 10, 50),
        )
        pred = (gt[0], B(0, 0, 10, 10), B(0, 0, 10, 9), B(0, 0, 10, 10))
        assert average_overlap(pred, gt) == pytest.approx(0.6, abs=1e-12)
        assert success_rate(pred, gt, 0.5) == pytest.approx(2 / 3, abs=1e-15)
        assert success_rate(pred, gt, 0.75) == pytest.approx(1 / 3, abs=1e-15)

    def test_all_absent(self):
        gt = perfect(4)
        pred = (gt[0], None, None, None)
        assert average_overlap(pred, gt) == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            gt, pred = _random_pair(rng, int(rng.integers(3, 30)))
            assert average_overlap(pred, gt) == pytest.approx(
                brute_average_overlap(_as_tuples(pred), _as_tuples(gt)), abs=1e-12
            )


class TestSimplifiedEao:
    def test_single_perfect_sequence(self):
        summary = simplified_eao([[1.0, 1.0, 1.0]], (1, 3))
        assert summary.eao == 1.0
        assert summary.accuracy == 1.0
        assert summary.robustness == 1.0

    def test_hand_enumeration(self):
        # curves: L=2 -> 1.0, L=3 -> 2/3, L=4 -> 1/2; mean = 13/18
        summary = simplified_eao([[1.0, 1.0, 0.0, 0.0]], (2, 4))
        assert summary.eao == pytest.approx(13 / 18, abs=1e-15)

    def test_all_zero(self):
        summary = simplified_eao([[0.0, 0.0]], (1, 2))
        assert summary.eao == 0.0
        assert summary.robustness == 0.0
        assert summary.accuracy == 0.0

    def test_short_sequences_zero_padded(self):
        summary = simplified_eao([[1.0], [1.0, 1.0, 1.0]], (3, 3))
        assert summary.eao == pytest.approx((1 / 3 + 1.0) / 2, abs=1e-15)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            simplified_eao([], (1, 2))
        with pytest.raises(BadInterval):
            simplified_eao([[1.0]], (3, 2))
        with pytest.raises(BadInterval):
            simplified_eao([[1.0]], (0, 2))


class TestTop1Accuracy:
    def test_identical(self):
        assert top1_accuracy(["a", "b"], ["a", "b"]) == 1.0

    def test_disjoint(self):
        assert top1_accuracy(["a", "a"], ["b", "b"]) == 0.0

    def test_three_of_four(self):
        assert top1_accuracy(["a", "b", "c", "d"], ["a", "b", "c", "x"]) == 0.75

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            top1_accuracy(["a"], ["a", "b"])
        with pytest.raises(EmptyInput):
            top1_accuracy([], [])


class TestInvariants:
    def test_monotone_in_single_frame_overlap(self):
        gt = perfect(6)
        rng = np.random.default_rng(3)
        base_offsets = rng.uniform(0, 10, size=6)
        pred = tuple(B(gt[i].x + base_offsets[i], gt[i].y, 10, 10) for i in range(6))
        improved = list(pred)
        improved[3] = gt[3]  # raise one frame's overlap to 1
        improved = tuple(improved)
        assert success_auc(improved, gt) >= success_auc(pred, gt)
        assert average_overlap(improved, gt) >= average_overlap(pred, gt)
        assert success_rate(improved, gt, 0.5) >= success_rate(pred, gt, 0.5)

    def test_sr75_le_sr50_and_auc_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            gt, pred = _random_pair(rng, 20)
            sr50 = success_rate(pred, gt, 0.5)
            sr75 = success_rate(pred, gt, 0.75)
            auc = success_auc(pred, gt)
            assert sr75 <= sr50
            assert auc <= 1.0
            assert auc >= sr50 * 25 / 51 - 1e-12  # 25 thresholds lie below 0.5

    def test_partition_decomposability(self):
        """A frame-wise-mean metric equals the length-weighted mean of its parts."""
        rng = np.random.default_rng(5)
        gt, pred = _random_pair(rng, 31, absent_prob=0.0)
        scores = frame_scores(pred, gt)
        for kind in ("ao", "auc", "sr50", "sr75"):
            kernel = metric_kernel(kind)
            whole = math.fsum(kernel(scores.iou)) / len(scores)
            cuts = [0, 7, 12, 25, len(scores)]
            weighted = 0.0
            for lo, hi in zip(cuts, cuts[1:]):
                part = kernel(scores.iou[lo:hi])
                weighted += math.fsum(part)
            assert whole == pytest.approx(weighted / len(scores), abs=1e-12)


class TestReports:
    def test_metric_report_validation(self):
        with pytest.raises(ValueError):
            MetricReport(1.2, 0, 0, 0, 0, 0, 0, 0, 0, 1)
        with pytest.raises(ValueError):
            MetricReport(0.5, 0.5, 0.5, 0.5, 0.2, 0.4, 0.5, 0.5, 0.5, 1)  # sr75 > sr50

    def test_aggregate(self):
        gt = perfect(5)
        m = sequence_metrics("s", gt, gt)
        report = aggregate_report([m, m], [[1.0] * 4, [1.0] * 4])
        assert report.ao == 1.0
        assert report.frames_evaluated == 8
        assert report.eao == 1.0


def _random_pair(rng, m, absent_prob=0.15):
    gt = []
    pred = []
    for f in range(m):
        g = B(rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(2, 40), rng.uniform(2, 40))
        gt.append(g)
        if f > 0 and rng.random() < absent_prob:
            pred.append(None)
        else:
            pred.append(
                B(
                    g.x + rng.uniform(-15, 15),
                    g.y + rng.uniform(-15, 15),
                    max(g.w + rng.uniform(-5, 5), 1),
                    max(g.h + rng.uniform(-5, 5), 1),
                )
            )
    return tuple(gt), tuple(pred)


def _as_tuples(traj):
    return [None if b is None else (b.x, b.y, b.w, b.h) for b in traj]
