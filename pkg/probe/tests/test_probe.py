import math

import pytest
import torch

from trackselect.predictor import load_external_predictions
from trackselect.selection import PredictedPolicy, evaluate_policy

from trackprobe.backbones import backbone_checksum, build_backbone, set_frozen
from trackprobe.data import frame_paths, load_window, read_label_file
from trackprobe.probe import (
    ProbeConfig,
    export_predictions,
    extract_window_embeddings,
    train_probe,
    write_interchange,
)


class TestWindowEmbeddings:
    def _backbone(self):
        backbone, dim = build_backbone("tiny", seed=3)
        set_frozen(backbone, True)
        return backbone, dim

    def test_identical_frames_pool_to_single_frame_embedding(self):
        backbone, _ = self._backbone()
        frame = torch.rand(1, 3, 64, 64)
        window = frame.repeat(5, 1, 1, 1)
        pooled = extract_window_embeddings(backbone, window)
        single = extract_window_embeddings(backbone, frame)
        assert torch.allclose(pooled, single, atol=1e-6)

    def test_window_one_is_first_frame_embedding(self, toy_tree):
        backbone, _ = self._backbone()
        paths = frame_paths(toy_tree.frames_root, toy_tree.sequences[0].id)
        one = extract_window_embeddings(backbone, load_window(paths[:1], 64))
        first = extract_window_embeddings(backbone, load_window([paths[0]], 64))
        assert torch.equal(one, first)

    def test_embedding_shape(self):
        backbone, dim = self._backbone()
        window = torch.rand(4, 3, 64, 64)
        assert extract_window_embeddings(backbone, window).shape == (dim,)


class TestTraining:
    def test_linear_probe_overfits_toy_set(self, toy_tree):
        config = ProbeConfig(
            label_file=str(toy_tree.label_file),
            frames_root=str(toy_tree.frames_root),
            mode="linear",
            epochs=300,
            seed=0,
        )
        model = train_probe(config)
        # frozen-backbone contract: parameters untouched by training
        assert model.backbone_checksums["before"] == model.backbone_checksums["after"]
        labels, _ = read_label_file(toy_tree.label_file)
        hits = 0
        for lab in labels:
            window = load_window(
                frame_paths(toy_tree.frames_root, lab.video_id)[: config.window],
                config.input_size,
            )
            scores = model.scores(window)
            hits += model.trackers[int(scores.argmax())] == lab.winner_id
        assert hits == len(labels)  # 100% train top-1

    def test_finetune_mode_updates_backbone(self, toy_tree):
        config = ProbeConfig(
            label_file=str(toy_tree.label_file),
            frames_root=str(toy_tree.frames_root),
            mode="finetune",
            epochs=2,
            seed=0,
        )
        model = train_probe(config)
        assert model.backbone_checksums["before"] != model.backbone_checksums["after"]

    def test_seed_determinism(self, toy_tree):
        config = ProbeConfig(
            label_file=str(toy_tree.label_file),
            frames_root=str(toy_tree.frames_root),
            epochs=30,
            seed=5,
        )
        first = train_probe(config)
        second = train_probe(config)
        assert first.loss_curve == second.loss_curve

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            ProbeConfig(label_file="x", frames_root="y", mode="magic")


@pytest.fixture(scope="session")
def model(toy_tree):
    return train_probe(
        ProbeConfig(
            label_file=str(toy_tree.label_file),
            frames_root=str(toy_tree.frames_root),
            epochs=300,
            seed=0,
        )
    )


class TestExport:
    def test_video_level_record_counts_and_shape(self, toy_tree, model):
        records = export_predictions(model, level="video")
        assert len(records) == len(toy_tree.sequences)
        for r in records:
            assert r["frame_index"] == 1
            values = list(r["scores"].values())
            assert all(math.isfinite(v) for v in values)
            assert math.fsum(values) == pytest.approx(1.0, abs=1e-9)
            assert r["chosen"] == max(r["scores"], key=r["scores"].get)

    def test_frame_level_record_counts(self, toy_tree, model):
        k = 5
        records = export_predictions(model, level="frame", k=k)
        expected = sum(math.ceil((m - 1) / k) for m in toy_tree.frame_counts.values())
        assert len(records) == expected

    def test_criterion_9_end_to_end(self, toy_tree, model, tmp_path):
        """Exported file passes the primary's validation and drives a policy."""
        for level in ("video", "frame"):
            path = tmp_path / f"preds_{level}.jsonl"
            write_interchange(path, export_predictions(model, level=level, k=5))
            records = load_external_predictions(path, toy_tree.manifest.trackers)
            assert len(records) > 0
            policy = PredictedPolicy(
                predictions={(r.sequence_id, r.frame_index): r for r in records}
            )
            evaluation = evaluate_policy(
                toy_tree.sequences,
                toy_tree.results,
                list(toy_tree.manifest.trackers),
                policy,
                level=level,
                k=5,
                frame_costs=toy_tree.manifest.frame_costs,
            )
            assert 0.0 <= evaluation.report.auc <= 1.0
            print(
                f"\nACCEPTANCE PASS - criterion 9 ({level} level): "
                f"interchange valid, predicted-policy auc {evaluation.report.auc:.3f}"
            )
