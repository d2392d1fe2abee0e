"""Label-file and frame-directory IO.

The label file is the line-delimited format the labeling pipeline
emits: a header record carrying the tracker order, then one record per
video with the winner index and a degenerate flag. Frames live as one
image directory per sequence: ``<frames_root>/<sequence_id>/0001.png``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

__all__ = ["VideoLabel", "read_label_file", "frame_paths", "sequence_ids", "load_window"]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass(frozen=True)
class VideoLabel:
    video_id: str
    winner_index: int
    winner_id: str
    degenerate: bool


def read_label_file(path: str | Path) -> tuple[list[VideoLabel], tuple[str, ...]]:
    """Parse the labeled-dataset file; returns (labels, tracker order)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty label file")
    trackers = tuple(json.loads(lines[0])["trackers"])
    labels = []
    for line in lines[1:]:
        if not line.strip():
            continue
        row = json.loads(line)
        labels.append(
            VideoLabel(
                video_id=str(row["video_id"]),
                winner_index=int(row["winner_index"]),
                winner_id=str(row["winner_id"]),
                degenerate=bool(row["degenerate"]),
            )
        )
    return labels, trackers


def sequence_ids(frames_root: str | Path) -> list[str]:
    """Sequence directories under the frames root, sorted by id."""
    root = Path(frames_root)
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def frame_paths(frames_root: str | Path, sequence_id: str) -> list[Path]:
    """All frame images of one sequence, in filename order."""
    seq_dir = Path(frames_root) / sequence_id
    paths = sorted(p for p in seq_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise FileNotFoundError(f"no frames under {seq_dir}")
    return paths


def load_window(paths: list[Path], size: int) -> torch.Tensor:
    """Stack frames into a (n, 3, size, size) float tensor in [0, 1]."""
    arrays = []
    for path in paths:
        with Image.open(path) as img:
            img = img.convert("RGB").resize((size, size), Image.BILINEAR)
            arrays.append(np.asarray(img, dtype=np.float32) / 255.0)
    stacked = np.stack(arrays).transpose(0, 3, 1, 2)
    return torch.from_numpy(stacked)
