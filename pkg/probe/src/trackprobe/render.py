"""Synthetic frame rendering from annotation trees.

The evaluation toolkit is annotation-only; this helper rasterizes its
datasets into per-sequence image directories so the probe has pixels to
look at. Each sequence gets a deterministic background color keyed by
its id (and shaded by its attribute tags when present) with the target
drawn as a filled rectangle at the ground-truth box, so a frozen
backbone can tell sequences and scene types apart.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

from PIL import Image, ImageDraw

__all__ = ["render_sequence", "render_dataset"]


def _color_from(key: str) -> tuple[int, int, int]:
    digest = hashlib.sha256(key.encode()).digest()
    return (64 + digest[0] % 128, 64 + digest[1] % 128, 64 + digest[2] % 128)


def _parse_boxes(text: str) -> list[tuple[float, float, float, float] | None]:
    boxes = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line == "0" or line.lower() == "nan,nan,nan,nan":
            boxes.append(None)
            continue
        x, y, w, h = (float(p) for p in line.replace("\t", ",").split(","))
        boxes.append(None if any(math.isnan(v) for v in (x, y, w, h)) else (x, y, w, h))
    return boxes


def render_sequence(
    sequence_dir: str | Path,
    out_dir: str | Path,
    size: int = 64,
    image_extent: tuple[float, float] = (640.0, 480.0),
) -> int:
    """Rasterize one sequence directory; returns the frame count."""
    sequence_dir = Path(sequence_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    boxes = _parse_boxes((sequence_dir / "groundtruth.txt").read_text(encoding="utf-8"))
    attr_path = sequence_dir / "attributes.txt"
    attr_key = attr_path.read_text(encoding="utf-8") if attr_path.is_file() else ""
    background = _color_from(sequence_dir.name + "|" + attr_key)
    target = tuple(255 - c for c in background)
    sx = size / image_extent[0]
    sy = size / image_extent[1]
    for i, box in enumerate(boxes):
        img = Image.new("RGB", (size, size), background)
        if box is not None:
            x, y, w, h = box
            draw = ImageDraw.Draw(img)
            draw.rectangle(
                (x * sx, y * sy, (x + w) * sx, (y + h) * sy), fill=target
            )
        img.save(out / f"{i + 1:06d}.png")
    return len(boxes)


def render_dataset(
    dataset_root: str | Path,
    frames_root: str | Path,
    size: int = 64,
    image_extent: tuple[float, float] = (640.0, 480.0),
) -> dict[str, int]:
    """Rasterize every sequence under ``<dataset_root>/sequences``."""
    sequences_dir = Path(dataset_root) / "sequences"
    counts = {}
    for seq_dir in sorted(p for p in sequences_dir.iterdir() if p.is_dir()):
        counts[seq_dir.name] = render_sequence(
            seq_dir, Path(frames_root) / seq_dir.name, size, image_extent
        )
    return counts
