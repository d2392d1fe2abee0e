"""Linear probing of a frozen backbone for best-tracker prediction.

Each video is embedded by mean-pooling backbone features over its first
``window`` frames; a linear head maps the embedding to per-tracker
scores. In linear mode the backbone stays frozen ("linear probing");
finetune mode unfreezes everything. Predictions are exported in the
line-delimited interchange format the evaluation toolkit consumes:
one record per video (frame_index 1) or one per selection interval
(frame_index at every interval start), scores softmax-normalized so
each record sums to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .backbones import backbone_checksum, build_backbone, set_frozen
from .data import frame_paths, load_window, read_label_file, sequence_ids

__all__ = [
    "ProbeConfig",
    "ProbeModel",
    "extract_window_embeddings",
    "embed_video",
    "train_probe",
    "export_predictions",
    "write_interchange",
]


@dataclass(frozen=True)
class ProbeConfig:
    """Training/extraction settings for one probe run."""

    label_file: str
    frames_root: str
    backbone: str = "tiny"
    mode: str = "linear"  # linear (frozen backbone) | finetune
    window: int = 5
    input_size: int = 64
    epochs: int = 200
    lr: float = 0.05
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("linear", "finetune"):
            raise ValueError(f"unknown probe mode {self.mode!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass
class ProbeModel:
    """Frozen (or finetuned) backbone plus the trained linear head.

    Embeddings are standardized with statistics from the training set
    before the head sees them; raw backbone features can be arbitrarily
    small in scale.
    """

    backbone: nn.Module
    head: nn.Linear
    trackers: tuple[str, ...]
    config: ProbeConfig
    feature_mean: torch.Tensor
    feature_std: torch.Tensor
    loss_curve: tuple[float, ...] = ()
    backbone_checksums: dict = field(default_factory=dict)  # before/after training

    @torch.no_grad()
    def scores(self, window: torch.Tensor) -> torch.Tensor:
        """Softmax scores (sum to 1) for one stacked frame window."""
        self.backbone.eval()
        self.head.eval()
        embedding = extract_window_embeddings(self.backbone, window)
        standardized = (embedding - self.feature_mean) / self.feature_std
        return torch.softmax(self.head(standardized), dim=-1)


@torch.no_grad()
def extract_window_embeddings(backbone: nn.Module, window: torch.Tensor) -> torch.Tensor:
    """Mean-pooled backbone embedding of a (n, 3, H, W) frame window."""
    was_training = backbone.training
    backbone.eval()
    features = backbone(window)
    if was_training:
        backbone.train()
    return features.mean(dim=0)


def embed_video(
    backbone: nn.Module,
    frames_root: str | Path,
    sequence_id: str,
    window: int,
    input_size: int,
    start_frame: int = 1,
) -> torch.Tensor:
    """Embedding of up to ``window`` frames ending just before ``start_frame``.

    ``start_frame`` 1 means the init window (the first frames of the
    video); larger values take the trailing frames before that index,
    mirroring how re-prediction sees only already-played frames.
    """
    paths = frame_paths(frames_root, sequence_id)
    if start_frame <= 1:
        chosen = paths[:window]
    else:
        lo = max(0, start_frame - 1 - window)
        chosen = paths[lo : start_frame - 1] or paths[:1]
    return extract_window_embeddings(backbone, load_window(chosen, input_size))


def train_probe(config: ProbeConfig) -> ProbeModel:
    """Fit the probe on the labeled videos (degenerate labels excluded).

    In linear mode every backbone parameter is frozen and only the head
    trains; the before/after parameter checksums are recorded so the
    freeze contract is checkable.
    """
    torch.manual_seed(config.seed)
    labels, trackers = read_label_file(config.label_file)
    usable = [lab for lab in labels if not lab.degenerate]
    if not usable:
        raise ValueError("no non-degenerate labeled videos")
    backbone, dim = build_backbone(config.backbone, seed=config.seed)
    set_frozen(backbone, config.mode == "linear")
    checksum_before = backbone_checksum(backbone)

    embeddings = []
    for lab in usable:
        window = load_window(
            frame_paths(config.frames_root, lab.video_id)[: config.window], config.input_size
        )
        embeddings.append(extract_window_embeddings(backbone, window))
    x = torch.stack(embeddings)
    y = torch.tensor([lab.winner_index for lab in usable], dtype=torch.long)
    mean = x.mean(dim=0)
    std = x.std(dim=0).clamp_min(1e-6)

    head = nn.Linear(dim, len(trackers))
    params = list(head.parameters())
    if config.mode == "finetune":
        backbone.train()
        params += list(backbone.parameters())
    optimizer = torch.optim.Adam(params, lr=config.lr)
    loss_fn = nn.CrossEntropyLoss()
    curve = []
    for _ in range(config.epochs):
        optimizer.zero_grad()
        if config.mode == "finetune":
            # embeddings change while the backbone trains
            x = torch.stack(
                [
                    backbone(
                        load_window(
                            frame_paths(config.frames_root, lab.video_id)[: config.window],
                            config.input_size,
                        )
                    ).mean(dim=0)
                    for lab in usable
                ]
            )
        loss = loss_fn(head((x - mean) / std), y)
        loss.backward()
        optimizer.step()
        curve.append(float(loss.detach()))
    return ProbeModel(
        backbone=backbone,
        head=head,
        trackers=trackers,
        config=config,
        feature_mean=mean,
        feature_std=std,
        loss_curve=tuple(curve),
        backbone_checksums={
            "before": checksum_before,
            "after": backbone_checksum(backbone),
        },
    )


def _intervals(frame_count: int, k: int) -> list[int]:
    """1-based interval start frames tiling the scored frames [2..m]."""
    if k < 1:
        raise ValueError("interval length must be >= 1")
    return list(range(2, frame_count + 1, k))


def export_predictions(
    model: ProbeModel,
    videos: Sequence[str] | None = None,
    level: str = "video",
    k: int = 5,
) -> list[dict]:
    """Interchange records for the given videos (default: all with frames).

    Video level emits one record per video at frame_index 1; frame level
    emits one per interval start, so a video with m frames yields
    ceil((m-1)/k) records.
    """
    config = model.config
    if videos is None:
        videos = sequence_ids(config.frames_root)
    records = []
    for video_id in sorted(videos):
        paths = frame_paths(config.frames_root, video_id)
        if level == "video":
            starts = [1]
        elif level == "frame":
            starts = _intervals(len(paths), k)
        else:
            raise ValueError(f"unknown level {level!r}")
        for start in starts:
            if start <= 1:
                chosen = paths[: config.window]
            else:
                lo = max(0, start - 1 - config.window)
                chosen = paths[lo : start - 1] or paths[:1]
            scores = model.scores(load_window(chosen, config.input_size))
            values = [float(v) for v in scores.tolist()]
            total = math.fsum(values)
            values = [v / total for v in values]
            best = max(range(len(values)), key=lambda i: (values[i], -i))
            records.append(
                {
                    "sequence_id": video_id,
                    "frame_index": start,
                    "scores": dict(zip(model.trackers, values)),
                    "chosen": model.trackers[best],
                }
            )
    return records


def write_interchange(path: str | Path, records: Sequence[dict]) -> None:
    """Write records in the line-delimited interchange format."""
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "sequence_id": r["sequence_id"],
                    "frame_index": r["frame_index"],
                    "scores": {t: float(s) for t, s in sorted(r["scores"].items())},
                    "chosen": r["chosen"],
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")
