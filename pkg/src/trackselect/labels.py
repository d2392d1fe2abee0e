"""Per-video selection labels from tracker performance.

For each video the per-tracker scores (success AUC by default, average
overlap for overlap-style pools) form a performance vector; the vector is
L2-normalized and thresholded into a one-hot label marking the winning
tracker.  Note the normalized entries have unit L2 norm, not unit sum.

Ties break toward the lowest tracker index (manifest order) so labels are
reproducible.  All-zero vectors are flagged degenerate rather than
rejected: all-failure videos must not abort batch jobs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .augment import AugmentSpec, apply_spec_to_result
from .dataset_io import ResultSet, SequenceRecord
from .metrics import sequence_metric

__all__ = [
    "DEGENERATE_NORM_EPS",
    "LabelingError",
    "PerfVector",
    "SelectionLabel",
    "performance_vector",
    "normalize",
    "onehot",
    "make_label",
    "build_label_set",
    "write_labels",
    "read_labels",
]

DEGENERATE_NORM_EPS = 1e-12


class LabelingError(ValueError):
    """Metric failure during label generation, tagged with (tracker, video)."""


@dataclass(frozen=True)
class PerfVector:
    """Per-video tracker scores, one per tracker in manifest order."""

    video_id: str
    scores: tuple[float, ...]
    metric: str = "auc"

    def __post_init__(self):
        if not self.scores:
            raise ValueError(f"{self.video_id}: empty score vector")
        for s in self.scores:
            if not math.isfinite(s) or s < 0.0:
                raise ValueError(f"{self.video_id}: bad score {s!r}")


@dataclass(frozen=True)
class SelectionLabel:
    """One-hot best-tracker label for a video."""

    video_id: str
    metric: str
    scores: tuple[float, ...]
    probs: tuple[float, ...]
    onehot: tuple[int, ...]
    winner_index: int
    winner_id: str
    degenerate: bool


def performance_vector(
    video: SequenceRecord, results: Sequence[ResultSet], metric: str = "auc"
) -> PerfVector:
    """Score every tracker on one video with the labeling metric."""
    scores = []
    for result in results:
        traj = result.entries.get(video.id)
        if traj is None:
            raise LabelingError(f"no trajectory (tracker={result.tracker_id}, video={video.id})")
        try:
            scores.append(sequence_metric(metric, traj, video.gt))
        except ValueError as err:
            raise LabelingError(
                f"{err} (tracker={result.tracker_id}, video={video.id})"
            ) from err
    return PerfVector(video_id=video.id, scores=tuple(scores), metric=metric)


def normalize(scores: Sequence[float]) -> tuple[tuple[float, ...], bool]:
    """L2-normalize a score vector.

    Returns (probs, degenerate).  A vector with (near-)zero magnitude
    maps to the uniform 1/sqrt(N) vector with the degenerate flag set.
    """
    n = len(scores)
    norm = math.sqrt(math.fsum(s * s for s in scores))
    if norm <= DEGENERATE_NORM_EPS:
        return (tuple([1.0 / math.sqrt(n)] * n), True)
    return (tuple(s / norm for s in scores), False)


def onehot(probs: Sequence[float]) -> tuple[tuple[int, ...], int]:
    """One-hot vector with a 1 at the first index attaining the maximum."""
    if not probs:
        raise ValueError("empty probability vector")
    winner = max(range(len(probs)), key=lambda i: (probs[i], -i))
    vec = tuple(1 if i == winner else 0 for i in range(len(probs)))
    return (vec, winner)


def make_label(perf: PerfVector, trackers: Sequence[str]) -> SelectionLabel:
    """Label one video from its performance vector."""
    if len(perf.scores) != len(trackers):
        raise LabelingError(
            f"{perf.video_id}: {len(perf.scores)} scores for {len(trackers)} trackers"
        )
    probs, degenerate = normalize(perf.scores)
    vec, winner = onehot(probs)
    return SelectionLabel(
        video_id=perf.video_id,
        metric=perf.metric,
        scores=perf.scores,
        probs=probs,
        onehot=vec,
        winner_index=winner,
        winner_id=trackers[winner],
        degenerate=degenerate,
    )


def build_label_set(
    sequences: Sequence[SequenceRecord],
    results: Sequence[ResultSet],
    metric: str = "auc",
    relabel_augmented: bool = False,
) -> list[SelectionLabel]:
    """Label every sequence; output follows the input sequence order.

    Augmented sequences (ids of the form ``base#tag[#tag...]``) have no
    stored tracker outputs.  By default they inherit the base video's
    label; with ``relabel_augmented`` each tracker's base trajectory is
    pushed through the same transform chain and scored afresh.
    """
    trackers = [r.tracker_id for r in results]
    base_labels: dict[str, SelectionLabel] = {}
    out: list[SelectionLabel] = []
    for seq in sequences:
        if "#" not in seq.id:
            label = make_label(performance_vector(seq, results, metric), trackers)
            base_labels[seq.id] = label
            out.append(label)
            continue
        base_id, *tags = seq.id.split("#")
        if not relabel_augmented:
            base = base_labels.get(base_id)
            if base is None:
                raise LabelingError(f"{seq.id}: base video {base_id!r} not labeled yet")
            out.append(
                SelectionLabel(
                    video_id=seq.id,
                    metric=base.metric,
                    scores=base.scores,
                    probs=base.probs,
                    onehot=base.onehot,
                    winner_index=base.winner_index,
                    winner_id=base.winner_id,
                    degenerate=base.degenerate,
                )
            )
            continue
        specs = [AugmentSpec.from_tag(tag) for tag in tags]
        scores = []
        for result in results:
            traj = result.entries.get(base_id)
            if traj is None:
                raise LabelingError(
                    f"no trajectory (tracker={result.tracker_id}, video={base_id})"
                )
            for spec in specs:
                traj = apply_spec_to_result(spec, traj, len(traj))
            try:
                scores.append(sequence_metric(metric, traj, seq.gt))
            except ValueError as err:
                raise LabelingError(
                    f"{err} (tracker={result.tracker_id}, video={seq.id})"
                ) from err
        out.append(
            make_label(PerfVector(video_id=seq.id, scores=tuple(scores), metric=metric), trackers)
        )
    return out


def write_labels(path: str | Path, labels: Sequence[SelectionLabel], trackers: Sequence[str]) -> None:
    """Write the labeled-dataset file (JSON lines, header record first)."""
    lines = [json.dumps({"trackers": list(trackers)}, sort_keys=True)]
    for label in labels:
        lines.append(
            json.dumps(
                {
                    "video_id": label.video_id,
                    "metric": label.metric,
                    "scores": list(label.scores),
                    "probs": list(label.probs),
                    "winner_index": label.winner_index,
                    "winner_id": label.winner_id,
                    "degenerate": label.degenerate,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path: str | Path) -> tuple[list[SelectionLabel], tuple[str, ...]]:
    """Read a labeled-dataset file back into labels plus the tracker order."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty label file")
    header = json.loads(lines[0])
    trackers = tuple(header["trackers"])
    labels = []
    for line in lines[1:]:
        if not line.strip():
            continue
        row = json.loads(line)
        winner = int(row["winner_index"])
        vec = tuple(1 if i == winner else 0 for i in range(len(trackers)))
        labels.append(
            SelectionLabel(
                video_id=row["video_id"],
                metric=row["metric"],
                scores=tuple(float(s) for s in row["scores"]),
                probs=tuple(float(p) for p in row["probs"]),
                onehot=vec,
                winner_index=winner,
                winner_id=row["winner_id"],
                degenerate=bool(row["degenerate"]),
            )
        )
    return labels, trackers
