import math

import pytest
from hypothesis import given, strategies as st

from trackselect.augment import expand_training_set
from trackselect.dataset_io import ResultSet, SequenceRecord
from trackselect.geometry import BBox
from trackselect.labels import (
    PerfVector,
    build_label_set,
    make_label,
    normalize,
    onehot,
    performance_vector,
    read_labels,
    write_labels,
)

score_vectors = st.lists(st.floats(0, 100), min_size=1, max_size=17)


def _toy_video(n=6):
    gt = tuple(BBox(float(i), 0.0, 10.0, 10.0) for i in range(n))
    return SequenceRecord("vid", n, gt, frozenset(), "train")


def _result(tracker_id, traj):
    return ResultSet(tracker_id, {"vid": traj})


class TestPerformanceVector:
    def test_perfect_vs_absent(self):
        video = _toy_video()
        perfect = _result("good", video.gt)
        absent = _result("bad", (video.gt[0],) + (None,) * (video.frame_count - 1))
        perf = performance_vector(video, [perfect, absent])
        assert perf.scores[0] == pytest.approx(50 / 51, abs=1e-15)
        assert perf.scores[1] == 0.0

    def test_singleton_pool(self):
        video = _toy_video()
        perf = performance_vector(video, [_result("only", video.gt)])
        assert len(perf.scores) == 1

    def test_identical_trackers_equal_scores(self):
        video = _toy_video()
        traj = tuple(BBox(b.x + 1, b.y, b.w, b.h) for b in video.gt)
        perf = performance_vector(video, [_result("a", traj), _result("b", traj)])
        assert perf.scores[0] == perf.scores[1]


class TestNormalize:
    def test_three_four(self):
        probs, degenerate = normalize([3.0, 4.0])
        assert probs == pytest.approx((0.6, 0.8), abs=1e-15)
        assert not degenerate

    def test_all_zero_degenerate(self):
        probs, degenerate = normalize([0.0, 0.0])
        assert degenerate
        assert probs == pytest.approx((1 / math.sqrt(2),) * 2, abs=1e-15)

    def test_scale_invariance_of_singleton(self):
        for c in (0.1, 1.0, 7.5):
            probs, _ = normalize([c])
            assert probs[0] == pytest.approx(1.0, abs=1e-12)

    @given(score_vectors)
    def test_unit_norm_or_degenerate(self, scores):
        probs, degenerate = normalize(scores)
        norm = math.sqrt(math.fsum(p * p for p in probs))
        assert norm == pytest.approx(1.0, abs=1e-9)
        if not degenerate:
            assert max(range(len(scores)), key=lambda i: (scores[i], -i)) == max(
                range(len(probs)), key=lambda i: (probs[i], -i)
            )


class TestOnehot:
    def test_basic(self):
        vec, winner = onehot([0.3, 0.5, 0.2])
        assert vec == (0, 1, 0)
        assert winner == 1

    def test_tie_break_first_index(self):
        vec, winner = onehot([0.5, 0.5])
        assert vec == (1, 0)
        assert winner == 0

    def test_matches_normalized_argmax(self):
        probs, _ = normalize([3.0, 4.0])
        _, winner = onehot(probs)
        assert winner == 1

    @given(score_vectors)
    def test_exactly_one_hot(self, scores):
        vec, winner = onehot(scores)
        assert sum(vec) == 1
        assert vec[winner] == 1

    @given(st.lists(st.floats(0.001, 100), min_size=2, max_size=10, unique=True), st.data())
    def test_permutation_equivariance(self, scores, data):
        perm = data.draw(st.permutations(range(len(scores))))
        permuted = [scores[p] for p in perm]
        vec, winner = onehot(scores)
        pvec, pwinner = onehot(permuted)
        assert permuted[pwinner] == scores[winner]
        assert [vec[p] for p in perm] == list(pvec)

    def test_tie_break_follows_permuted_order(self):
        # with tied maxima the winner is the first tied index in the
        # vector's own order, whatever that order is
        assert onehot([0.2, 0.7, 0.7])[1] == 1
        assert onehot([0.7, 0.7, 0.2])[1] == 0
        assert onehot([0.7, 0.2, 0.7])[1] == 0


class TestLabels:
    def test_make_label(self):
        perf = PerfVector("vid", (3.0, 4.0))
        label = make_label(perf, ["a", "b"])
        assert label.winner_index == 1
        assert label.winner_id == "b"
        assert label.onehot == (0, 1)
        assert not label.degenerate

    def test_round_trip(self, tmp_path):
        video = _toy_video()
        results = [
            _result("a", video.gt),
            _result("b", (video.gt[0],) + (None,) * (video.frame_count - 1)),
        ]
        labels = build_label_set([video], results)
        path = tmp_path / "labels.jsonl"
        write_labels(path, labels, ["a", "b"])
        loaded, trackers = read_labels(path)
        assert trackers == ("a", "b")
        assert loaded == labels
        write_labels(tmp_path / "labels2.jsonl", loaded, trackers)
        assert (tmp_path / "labels2.jsonl").read_bytes() == path.read_bytes()


class TestAugmentedLabeling:
    def _setup(self):
        video = _toy_video(12)
        good = _result("good", video.gt)
        bad = _result(
            "bad", (video.gt[0],) + tuple(BBox(b.x + 50, b.y, b.w, b.h) for b in video.gt[1:])
        )
        return video, [good, bad]

    def test_reuse_copies_base_label(self):
        video, results = self._setup()
        expanded = expand_training_set([video])
        labels = build_label_set(expanded, results, relabel_augmented=False)
        base = labels[0]
        assert all(lab.winner_id == base.winner_id for lab in labels)
        assert all(lab.scores == base.scores for lab in labels)

    def test_relabel_scores_transformed_results(self):
        video, results = self._setup()
        expanded = expand_training_set([video])
        labels = build_label_set(expanded, results, relabel_augmented=True)
        by_id = {lab.video_id: lab for lab in labels}
        reversed_label = by_id["vid#rev"]
        # reversal keeps per-frame geometry, so the winner cannot change
        assert reversed_label.winner_id == by_id["vid"].winner_id
        assert all(lab.winner_id == "good" for lab in labels)
