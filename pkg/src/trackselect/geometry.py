"""Axis-aligned box arithmetic underlying every evaluation measure.

Boxes are continuous (real-valued) with interval semantics
``[x, x + w) x [y, y + h)``; there is no pixel-grid rasterization.
All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "BBox",
    "MaybeBox",
    "DegenerateGroundTruth",
    "iou",
    "center_error",
    "norm_center_error",
]


class DegenerateGroundTruth(ValueError):
    """Ground-truth box has no positive extent along some axis."""


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box: top-left corner plus non-negative size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"non-finite bbox field {name}={value!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative bbox size w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def scaled(self, s: float) -> "BBox":
        """Box scaled by ``s`` about the image origin."""
        return BBox(self.x * s, self.y * s, self.w * s, self.h * s)

    def shrunk(self, factor: float) -> "BBox":
        """Box shrunk about its own center: new size = (1 - factor) * old size."""
        cx, cy = self.center
        w = (1.0 - factor) * self.w
        h = (1.0 - factor) * self.h
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


# A missing/failed prediction or an annotated target absence.
MaybeBox = Optional[BBox]


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1].

    Degenerate inputs are handled: if the union has zero area the
    overlap is defined as 0.  Identical boxes score exactly 1, and the
    result is clamped so rounding in the corner arithmetic can never
    push it outside [0, 1].
    """
    if a == b:
        return 1.0 if a.area > 0.0 else 0.0
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = min(ix, a.w, b.w) * min(iy, a.h, b.h)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def center_error(a: BBox, b: BBox) -> float:
    """Euclidean distance between the two box centers, in pixels."""
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)


def norm_center_error(pred: BBox, gt: BBox) -> float:
    """Center offset normalized per-axis by the ground-truth box size.

    Raises:
        DegenerateGroundTruth: if the ground-truth box has zero width or
            height; such frames are excluded from normalized precision.
    """
    if gt.w <= 0.0 or gt.h <= 0.0:
        raise DegenerateGroundTruth(f"gt box has zero extent: w={gt.w} h={gt.h}")
    px, py = pred.center
    gx, gy = gt.center
    return math.hypot((px - gx) / gt.w, (py - gy) / gt.h)
