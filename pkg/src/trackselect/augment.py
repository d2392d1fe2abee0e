"""Annotation-level training-set augmentation.

Four video-specific transforms expand the labeled training pool: temporal
subsampling (keep a fraction of frames), spatial rescaling of all boxes
about the image origin, temporal reversal, and target scale-down about
each box's own center.  Pixel-level augmentations (color distortion,
flips) belong to the image-consuming component; the provenance tag on
each derived sequence lets it apply the matching transform.

Every transform is deterministic given its spec, and each derived
sequence id is ``<base>#<tag>`` where the tag round-trips back to the
spec.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, replace
from typing import Sequence

from .dataset_io import SequenceRecord, Trajectory

__all__ = [
    "AugmentSpec",
    "TooShort",
    "IdCollision",
    "DEFAULT_SPECS",
    "kept_indices",
    "subsample_trajectory",
    "rescale_trajectory",
    "reverse_trajectory",
    "temporal_subsample",
    "spatial_rescale",
    "reverse",
    "target_scale",
    "apply_spec",
    "apply_spec_to_result",
    "expand_training_set",
]


class TooShort(ValueError):
    """Temporal subsampling would leave fewer than two frames."""


class IdCollision(ValueError):
    """Two derived sequences ended up with the same id."""


_TAG_RE = re.compile(r"^(temporal|spatial|target)(\d+)(?:s(\d+))?$|^(rev)$")


@dataclass(frozen=True)
class AugmentSpec:
    """One transform: kind plus its amount and (for temporal) a jitter seed.

    kinds: ``temporal`` (amount = keep ratio), ``spatial`` (amount = scale
    factor), ``target`` (amount = scale-down: new size = (1-amount)*old),
    ``reverse`` (amount unused).  Seed 0 keeps temporal subsampling on the
    plain stride; nonzero seeds jitter the kept frames inside their stride
    windows.
    """

    kind: str
    amount: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("temporal", "spatial", "target", "reverse"):
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if self.kind == "temporal" and not (0.0 < self.amount <= 1.0):
            raise ValueError(f"temporal keep ratio must be in (0, 1], got {self.amount}")
        if self.kind == "spatial" and self.amount <= 0.0:
            raise ValueError(f"spatial factor must be positive, got {self.amount}")
        if self.kind == "target" and not (0.0 <= self.amount < 1.0):
            raise ValueError(f"target scale-down must be in [0, 1), got {self.amount}")

    @property
    def tag(self) -> str:
        if self.kind == "reverse":
            return "rev"
        pct = int(round(self.amount * 100))
        if self.kind == "temporal":
            return f"temporal{pct}s{self.seed}"
        return f"{self.kind}{pct}"

    @classmethod
    def from_tag(cls, tag: str) -> "AugmentSpec":
        m = _TAG_RE.match(tag)
        if not m:
            raise ValueError(f"unparseable augmentation tag {tag!r}")
        if m.group(4) == "rev":
            return cls(kind="reverse")
        kind, pct, seed = m.group(1), m.group(2), m.group(3)
        return cls(kind=kind, amount=int(pct) / 100.0, seed=int(seed) if seed else 0)


# The stock expansion set: temporal keep ratios 10%/50% (the 50% one twice,
# second copy jittered), spatial factors 10%/50%, reversal, and target
# scale-downs 10%/20%/50% -- ten records per original including itself.
DEFAULT_SPECS: tuple[AugmentSpec, ...] = (
    AugmentSpec("temporal", 0.10),
    AugmentSpec("temporal", 0.50),
    AugmentSpec("temporal", 0.50, seed=1),
    AugmentSpec("spatial", 0.10),
    AugmentSpec("spatial", 0.50),
    AugmentSpec("reverse"),
    AugmentSpec("target", 0.10),
    AugmentSpec("target", 0.20),
    AugmentSpec("target", 0.50),
)


def kept_indices(frame_count: int, rate: float, seed: int = 0) -> tuple[int, ...]:
    """0-based indices kept by temporal subsampling.

    Keeps ceil(rate * m) frames.  Frame 0 is always kept; each remaining
    slot i draws from the stride window [floor(i*m/k), floor((i+1)*m/k)),
    at the window start when seed is 0, else uniformly via the seed.

    Raises:
        TooShort: fewer than two frames would remain.
    """
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    m = frame_count
    k = min(math.ceil(rate * m), m)
    if k < 2:
        raise TooShort(f"rate {rate} keeps {k} of {m} frames")
    indices = [0]
    for i in range(1, k):
        lo = (i * m) // k
        hi = ((i + 1) * m) // k - 1
        if seed == 0 or hi <= lo:
            indices.append(lo)
        else:
            rng = random.Random(seed * 1_000_003 + i)
            indices.append(rng.randint(lo, hi))
    return tuple(indices)


def subsample_trajectory(traj: Trajectory, indices: Sequence[int]) -> Trajectory:
    return tuple(traj[i] for i in indices)


def rescale_trajectory(traj: Trajectory, factor: float) -> Trajectory:
    return tuple(b.scaled(factor) if b is not None else None for b in traj)


def reverse_trajectory(traj: Trajectory) -> Trajectory:
    return tuple(reversed(traj))


def _derived(seq: SequenceRecord, spec: AugmentSpec, **changes) -> SequenceRecord:
    return replace(
        seq,
        id=f"{seq.id}#{spec.tag}",
        transforms=seq.transforms + (spec.tag,),
        **changes,
    )


def temporal_subsample(seq: SequenceRecord, rate: float, seed: int = 0) -> SequenceRecord:
    """Keep ceil(rate * m) frames of the sequence (frame 1 always kept)."""
    indices = kept_indices(seq.frame_count, rate, seed)
    gt = subsample_trajectory(seq.gt, indices)
    spec = AugmentSpec("temporal", rate, seed)
    return _derived(seq, spec, gt=gt, frame_count=len(gt))


def spatial_rescale(seq: SequenceRecord, factor: float) -> SequenceRecord:
    """Scale every box (and the image extent) by ``factor`` about the origin."""
    spec = AugmentSpec("spatial", factor)
    size = seq.image_size
    if size is not None:
        size = (size[0] * factor, size[1] * factor)
    return _derived(seq, spec, gt=rescale_trajectory(seq.gt, factor), image_size=size)


def reverse(seq: SequenceRecord) -> SequenceRecord:
    """Reverse frame order; the old last frame becomes the init frame."""
    return _derived(seq, AugmentSpec("reverse"), gt=reverse_trajectory(seq.gt))


def target_scale(seq: SequenceRecord, factor: float) -> SequenceRecord:
    """Shrink every ground-truth box about its own center by ``factor``."""
    spec = AugmentSpec("target", factor)
    gt = tuple(b.shrunk(factor) if b is not None else None for b in seq.gt)
    return _derived(seq, spec, gt=gt)


def apply_spec(spec: AugmentSpec, seq: SequenceRecord) -> SequenceRecord:
    if spec.kind == "temporal":
        return temporal_subsample(seq, spec.amount, spec.seed)
    if spec.kind == "spatial":
        return spatial_rescale(seq, spec.amount)
    if spec.kind == "reverse":
        return reverse(seq)
    return target_scale(seq, spec.amount)


def apply_spec_to_result(spec: AugmentSpec, traj: Trajectory, frame_count: int) -> Trajectory:
    """Transform a tracker trajectory consistently with an augmented sequence.

    Target scale-down only touches ground truth, so result trajectories
    pass through unchanged for that kind.
    """
    if spec.kind == "temporal":
        return subsample_trajectory(traj, kept_indices(frame_count, spec.amount, spec.seed))
    if spec.kind == "spatial":
        return rescale_trajectory(traj, spec.amount)
    if spec.kind == "reverse":
        return reverse_trajectory(traj)
    return traj


def expand_training_set(
    sequences: Sequence[SequenceRecord], specs: Sequence[AugmentSpec] = DEFAULT_SPECS
) -> list[SequenceRecord]:
    """Originals plus one augmented copy per spec, ids provenance-tagged.

    Raises:
        IdCollision: duplicate derived ids.
        TooShort: a temporal spec leaves a sequence under two frames.
    """
    out: list[SequenceRecord] = []
    seen: set[str] = set()
    for seq in sequences:
        for record in [seq] + [apply_spec(spec, seq) for spec in specs]:
            if record.id in seen:
                raise IdCollision(f"duplicate derived id {record.id!r}")
            seen.add(record.id)
            out.append(record)
    return out
