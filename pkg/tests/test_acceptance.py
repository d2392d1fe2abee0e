"""Acceptance suite: one test per exit criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -v -s``).

Headline benchmark numbers need live trackers and full videos, so
acceptance is property-based plus micro-fixture reproduction on the
synthetic suite.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from trackselect.augment import DEFAULT_SPECS, expand_training_set, kept_indices, reverse, spatial_rescale, target_scale
from trackselect.cli import main as cli_main
from trackselect.dataset_io import ResultSet, SequenceRecord, parse_trajectory, serialize_trajectory
from trackselect.geometry import BBox
from trackselect.labels import build_label_set, normalize, onehot, read_labels, write_labels
from trackselect.metrics import (
    average_overlap,
    norm_precision,
    precision_at,
    success_auc,
    success_rate,
)
from trackselect.predictor import (
    Featurizer,
    PredictionRecord,
    TrainingConfig,
    evaluate_top1_video,
    loss_and_grad,
    train,
)
from trackselect.report import build_bundle, bundle_from_json, bundle_to_json
from trackselect.selection import (
    FixedPolicy,
    OraclePolicy,
    PredictedPolicy,
    ablate_pool_size,
    evaluate_policy,
    read_plans,
    select_frame_level,
    select_video_level,
    write_plans,
)

from oracles import (
    brute_average_overlap,
    brute_norm_precision,
    brute_precision,
    brute_success_auc,
    brute_success_rate,
)

B = BBox


def _report(criterion: str, detail: str = ""):
    print(f"\nACCEPTANCE PASS - {criterion}" + (f" ({detail})" if detail else ""))


def _random_pair(rng, m):
    gt, pred = [], []
    for f in range(m):
        g = B(rng.uniform(0, 80), rng.uniform(0, 80), rng.uniform(2, 40), rng.uniform(2, 40))
        gt.append(g)
        if f > 0 and rng.random() < 0.12:
            pred.append(None)
        else:
            pred.append(
                B(
                    g.x + rng.uniform(-15, 15),
                    g.y + rng.uniform(-15, 15),
                    max(g.w + rng.uniform(-6, 6), 0.5),
                    max(g.h + rng.uniform(-6, 6), 0.5),
                )
            )
    return tuple(gt), tuple(pred)


def _as_tuples(traj):
    return [None if b is None else (b.x, b.y, b.w, b.h) for b in traj]


def test_criterion_1_metric_oracle_equivalence():
    """success_auc / AO / SR / precision / P_Norm vs brute force, <=1e-12."""
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        m = int(rng.integers(3, 28))
        gt, pred = _random_pair(rng, m)
        tgt, tpred = _as_tuples(gt), _as_tuples(pred)
        assert abs(success_auc(pred, gt) - brute_success_auc(tpred, tgt)) <= 1e-12
        assert abs(average_overlap(pred, gt) - brute_average_overlap(tpred, tgt)) <= 1e-12
        assert abs(success_rate(pred, gt, 0.5) - brute_success_rate(tpred, tgt, 0.5)) <= 1e-12
        assert abs(success_rate(pred, gt, 0.75) - brute_success_rate(tpred, tgt, 0.75)) <= 1e-12
        assert abs(precision_at(pred, gt) - brute_precision(tpred, tgt)) <= 1e-12
        assert abs(norm_precision(pred, gt) - brute_norm_precision(tpred, tgt)) <= 1e-12
        checked += 1
    elapsed = time.monotonic() - start
    assert checked >= 1000
    assert elapsed < 10.0, f"criterion 1 took {elapsed:.1f}s"
    _report("criterion 1: metric oracle equivalence", f"{checked} trajectories, {elapsed:.1f}s")


def test_criterion_2_label_generation_identities():
    """L2 normalization, argmax invariance, one-hot and degenerate contracts."""
    start = time.monotonic()
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        n = int(rng.integers(1, 18))
        scores = rng.random(n).tolist()
        probs, degenerate = normalize(scores)
        assert not degenerate
        assert abs(math.sqrt(math.fsum(p * p for p in probs)) - 1.0) <= 1e-9
        vec, winner = onehot(probs)
        assert sum(vec) == 1 and vec[winner] == 1
        assert winner == int(np.argmax(scores))
        # positive scaling leaves the winner unchanged
        scale = float(2.0 ** rng.integers(-6, 7))
        _, scaled_winner = onehot(normalize([s * scale for s in scores])[0])
        assert scaled_winner == winner
    # tie-break and degenerate paths, exact as specified
    vec, winner = onehot([0.5, 0.5])
    assert vec == (1, 0) and winner == 0
    probs, degenerate = normalize([0.0, 0.0])
    assert degenerate and probs == pytest.approx((1 / math.sqrt(2),) * 2, abs=1e-15)
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"criterion 2 took {elapsed:.1f}s"
    _report("criterion 2: label-generation identities", f"10000 vectors, {elapsed:.1f}s")


def test_criterion_3_oracle_dominance(separable_tree):
    """Video oracle >= every fixed tracker; frame oracle >= video oracle."""
    start = time.monotonic()
    sequences, results, pool = (
        separable_tree.sequences,
        separable_tree.results,
        separable_tree.pool,
    )
    assert len(sequences) >= 200 and len(pool) == 6
    fields = {"ao": "ao", "auc": "auc", "sr50": "sr50", "sr75": "sr75"}
    violations = 0
    for metric, field in fields.items():
        video = evaluate_policy(sequences, results, pool, OraclePolicy(metric), level="video")
        video_by_id = {m.sequence_id: getattr(m, field) for m in video.per_sequence}
        for tracker in pool:
            fixed = evaluate_policy(sequences, results, pool, FixedPolicy(tracker), level="video")
            if getattr(video.report, field) < getattr(fixed.report, field):
                violations += 1
            for m in fixed.per_sequence:
                if video_by_id[m.sequence_id] < getattr(m, field):
                    violations += 1
        frame = evaluate_policy(
            sequences, results, pool, OraclePolicy(metric), level="frame", k=5
        )
        for m in frame.per_sequence:
            if getattr(m, field) < video_by_id[m.sequence_id]:
                violations += 1
    elapsed = time.monotonic() - start
    assert violations == 0
    assert elapsed < 30.0, f"criterion 3 took {elapsed:.1f}s"
    _report(
        "criterion 3: oracle dominance",
        f"{len(sequences)} sequences x {len(fields)} metrics, zero violations, {elapsed:.1f}s",
    )


def test_criterion_4_pool_size_monotonicity(graded_tree):
    """Nested pools {3,6,9,12,15,17}: oracle scores non-decreasing, both levels."""
    start = time.monotonic()
    assert len(graded_tree.pool) == 17
    rows = ablate_pool_size(
        graded_tree.sequences,
        graded_tree.results,
        graded_tree.pool,
        sizes=(3, 6, 9, 12, 15, 17),
        metric="auc",
        k=5,
    )
    for prev, cur in zip(rows, rows[1:]):
        assert cur.video >= prev.video, (prev, cur)
        assert cur.frame >= prev.frame, (prev, cur)
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"criterion 4 took {elapsed:.1f}s"
    values = ", ".join(f"{r.pool_size}:{r.video:.3f}/{r.frame:.3f}" for r in rows)
    _report("criterion 4: pool-size monotonicity", f"{values}, {elapsed:.1f}s")


def test_criterion_5_predictor_sanity(separable_tree):
    """Held-out top-1 >= 0.90, perfect-predictor plan reproduction, gradient check."""
    start = time.monotonic()
    sequences, results, pool = (
        separable_tree.sequences,
        separable_tree.results,
        separable_tree.pool,
    )
    manifest = separable_tree.manifest
    labels = build_label_set(sequences, results)
    by_id = {lab.video_id: lab for lab in labels}
    train_seqs = [s for s in sequences if s.split == "train"]
    test_seqs = [s for s in sequences if s.split == "test"]
    featurizer = Featurizer(attributes=manifest.attributes)
    x = np.stack([featurizer.features(s) for s in train_seqs])
    model = train(
        x,
        [by_id[s.id] for s in train_seqs],
        manifest.trackers,
        featurizer,
        TrainingConfig(epochs=300, lr=0.5),
    )
    accuracy = evaluate_top1_video(model, test_seqs, by_id)
    assert accuracy >= 0.90, f"held-out top-1 {accuracy:.3f}"

    # A perfect predictor (fed the oracle's own choices) reproduces oracle plans.
    for level in ("video", "frame"):
        oracle = evaluate_policy(sequences, results, pool, OraclePolicy("auc"), level=level, k=5)
        predictions = {}
        for plan in oracle.plans:
            for iv in plan.choices:
                frame_index = 1 if level == "video" else iv.start
                scores = {t: float(t == iv.tracker) for t in pool}
                predictions[(plan.sequence_id, frame_index)] = PredictionRecord(
                    plan.sequence_id, frame_index, scores, iv.tracker
                )
        predicted = evaluate_policy(
            sequences, results, pool, PredictedPolicy(predictions=predictions), level=level, k=5
        )
        assert predicted.plans == oracle.plans

    # Analytic gradient vs central finite differences, relative error <= 1e-5.
    rng = np.random.default_rng(5)
    xs = rng.normal(size=(10, 5))
    ys = np.zeros((10, 4))
    ys[np.arange(10), rng.integers(0, 4, 10)] = 1.0
    w = rng.normal(size=(5, 4)) * 0.3
    b = rng.normal(size=4) * 0.3
    _, grad_w, grad_b = loss_and_grad(w, b, xs, ys, 0.01)
    h = 1e-6
    worst = 0.0
    for arr, grad in ((w, grad_w), (b, grad_b)):
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            up, _, _ = loss_and_grad(w, b, xs, ys, 0.01)
            arr[idx] = orig - h
            down, _, _ = loss_and_grad(w, b, xs, ys, 0.01)
            arr[idx] = orig
            fd = (up - down) / (2 * h)
            rel = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-8)
            worst = max(worst, rel)
            it.iternext()
    assert worst <= 1e-5
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"criterion 5 took {elapsed:.1f}s"
    _report(
        "criterion 5: predictor sanity",
        f"top-1 {accuracy:.3f}, gradient rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_6_overhead_model():
    """n_e = ceil((m-1)/k), overhead = 0.84*n_e, fps on a hand-computed fixture."""
    for m in range(2, 160, 7):
        seq = SequenceRecord("s", m, tuple(B(0, 0, 5, 5) for _ in range(m)), frozenset(), "test")
        results = [ResultSet("a", {"s": seq.gt})]
        video = select_video_level(seq, results, ["a"], FixedPolicy("a"))
        assert video.n_e == 1
        assert video.overhead_s == 0.84
        for k in range(1, 12):
            plan = select_frame_level(seq, results, ["a"], FixedPolicy("a"), k=k)
            assert plan.n_e == math.ceil((m - 1) / k)
            assert plan.overhead_s == 0.84 * plan.n_e

    # 3-sequence fixture, hand-computed fps.
    lengths = (11, 21, 31)
    sequences = [
        SequenceRecord(f"s{i}", m, tuple(B(0, 0, 5, 5) for _ in range(m)), frozenset(), "test")
        for i, m in enumerate(lengths)
    ]
    results = [
        ResultSet("a", {s.id: s.gt for s in sequences}),
        ResultSet("b", {s.id: s.gt for s in sequences}),
    ]
    costs = {"a": 0.02, "b": 0.04}
    ev = evaluate_policy(sequences, results, ["a", "b"], FixedPolicy("a"), "video", frame_costs=costs)
    # runtime = (10+20+30)*0.02 = 1.2 s; overhead = 3*0.84 = 2.52 s; frames = 63
    assert ev.simulated_runtime_s == pytest.approx(1.2, abs=1e-12)
    assert ev.total_overhead_s == pytest.approx(2.52, abs=1e-12)
    assert ev.fps == pytest.approx(63 / (1.2 + 2.52), abs=1e-9)
    ev_frame = evaluate_policy(
        sequences, results, ["a", "b"], FixedPolicy("b"), "frame", k=5, frame_costs=costs
    )
    # n_e = 2 + 4 + 6 = 12; overhead = 10.08 s; runtime = 60*0.04 = 2.4 s
    assert ev_frame.total_overhead_s == pytest.approx(10.08, abs=1e-12)
    assert ev_frame.simulated_runtime_s == pytest.approx(2.4, abs=1e-12)
    assert ev_frame.fps == pytest.approx(63 / (2.4 + 10.08), abs=1e-9)
    _report("criterion 6: overhead model", "n_e grid + 3-sequence fps fixture")


def test_criterion_7_augmentation_contracts():
    """Involution, exact scaling arithmetic, subsample counts, >=10x expansion."""
    gt = tuple(B(float(3 * i), float(2 * i), 12.0, 9.0) for i in range(40))
    seq = SequenceRecord("s", 40, gt, frozenset(), "train", (200.0, 200.0))
    assert reverse(reverse(seq)).gt == seq.gt
    scaled = spatial_rescale(seq, 0.5)
    assert scaled.gt[1] == B(1.5, 1.0, 6.0, 4.5)
    shrunk = target_scale(seq, 0.5)
    assert shrunk.gt[0] == B(3.0, 2.25, 6.0, 4.5)
    for m in (11, 15, 40, 100):
        for rate in (0.1, 0.25, 0.5, 1.0):
            assert len(kept_indices(m, rate)) == math.ceil(rate * m)
    expanded = expand_training_set([seq], DEFAULT_SPECS)
    assert len(expanded) >= 10
    assert len({r.id for r in expanded}) == len(expanded)
    _report("criterion 7: augmentation contracts", f"{len(expanded)} records per sequence")


def test_criterion_8_round_trips_and_determinism(tmp_path):
    """File round-trips byte-identical; two seeded pipeline runs identical."""
    # trajectory round-trip
    traj = (B(1.5, 2.25, 3.0, 4.0), None, B(0.125, 9.5, 2.5, 2.5))
    text = serialize_trajectory(traj)
    assert parse_trajectory(text) == traj
    assert serialize_trajectory(parse_trajectory(text)) == text

    # label round-trip
    seq = SequenceRecord("v", 4, tuple(B(0, 0, 5, 5) for _ in range(4)), frozenset(), "train")
    results = [ResultSet("a", {"v": seq.gt}), ResultSet("b", {"v": (seq.gt[0], None, None, None)})]
    labels = build_label_set([seq], results)
    lpath = tmp_path / "labels.jsonl"
    write_labels(lpath, labels, ["a", "b"])
    loaded, trackers = read_labels(lpath)
    assert loaded == labels
    write_labels(tmp_path / "labels2.jsonl", loaded, trackers)
    assert (tmp_path / "labels2.jsonl").read_bytes() == lpath.read_bytes()

    # plan round-trip
    plan = select_frame_level(seq, results, ["a", "b"], OraclePolicy("ao"), k=2)
    ppath = tmp_path / "plans.jsonl"
    write_plans(ppath, [plan])
    assert read_plans(ppath) == [plan]
    write_plans(tmp_path / "plans2.jsonl", read_plans(ppath))
    assert (tmp_path / "plans2.jsonl").read_bytes() == ppath.read_bytes()

    # report bundle round-trip
    ev = evaluate_policy([seq], results, ["a", "b"], OraclePolicy("auc"))
    bundle = build_bundle(ev, {"dataset": "tiny"}, labels=labels, sequences=[seq])
    assert bundle_from_json(bundle_to_json(bundle)) == bundle

    # two full pipeline runs with equal seeds -> byte-identical outputs
    outputs = []
    for run in ("one", "two"):
        root = tmp_path / run
        data = root / "data"
        rc = cli_main(
            ["synth", "--out", str(data), "--sequences", "12", "--trackers", "3", "--seed", "9"]
        )
        assert rc == 0
        manifest = str(data / "manifest.txt")
        results_dir = str(data / "results")
        rc = cli_main(
            ["label", "--manifest", manifest, "--results", results_dir,
             "--out", str(root / "labels.jsonl")]
        )
        assert rc == 0
        rc = cli_main(
            ["train", "--manifest", manifest, "--labels", str(root / "labels.jsonl"),
             "--out", str(root / "model.json")]
        )
        assert rc == 0
        rc = cli_main(
            ["report", "--manifest", manifest, "--results", results_dir,
             "--policy", "oracle", "--split", "test", "--no-figures",
             "--out", str(root / "report")]
        )
        assert rc == 0
        outputs.append(root)
    for rel in (
        "labels.jsonl",
        "model.json",
        "report/report.json",
        "report/report.jsonl",
        "report/metrics.csv",
        "report/plans.jsonl",
        "report/success_curve.csv",
    ):
        a = (outputs[0] / rel).read_bytes()
        b = (outputs[1] / rel).read_bytes()
        assert a == b, f"{rel} differs between identical runs"
    cmp = filecmp.dircmp(outputs[0] / "data", outputs[1] / "data")
    assert _trees_equal(cmp)
    _report("criterion 8: format round-trips and determinism")


def _trees_equal(cmp: filecmp.dircmp) -> bool:
    if cmp.left_only or cmp.right_only or cmp.diff_files or cmp.funny_files:
        return False
    return all(_trees_equal(sub) for sub in cmp.subdirs.values())
