"""Evaluation measures computed from predicted vs. ground-truth trajectories.

A trajectory is a per-frame tuple of optional boxes.  The first frame of
every sequence is the initialization frame and is excluded from scoring;
frames whose ground truth is absent (or has zero area) are skipped.  An
absent prediction on a scored frame counts as overlap 0 and center error
+inf.

Every trajectory-level measure except the expected-overlap summary is a
plain mean over scored frames of a per-frame kernel.  That makes each of
them decompose exactly into length-weighted means over contiguous frame
partitions, which the selection module relies on when splicing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .geometry import MaybeBox, center_error, iou, norm_center_error

__all__ = [
    "THRESHOLDS_IOU",
    "THRESHOLDS_NORM",
    "PRECISION_THRESHOLD_PX",
    "LengthMismatch",
    "NoScoredFrames",
    "EmptyInput",
    "BadInterval",
    "FrameScores",
    "MetricReport",
    "SequenceMetrics",
    "EaoSummary",
    "frame_scores",
    "overlap_series",
    "metric_kernel",
    "sequence_metric",
    "success_auc",
    "average_overlap",
    "success_rate",
    "precision_at",
    "norm_precision",
    "simplified_eao",
    "top1_accuracy",
    "sequence_metrics",
    "aggregate_report",
]

# 51-point grids: overlap thresholds sweep [0, 1], normalized-center-error
# thresholds sweep [0, 0.5].  Overlap comparisons are strict `>`, error
# comparisons are `<=`.
THRESHOLDS_IOU = np.arange(51) / 50.0
THRESHOLDS_NORM = np.arange(51) / 100.0
PRECISION_THRESHOLD_PX = 20.0


class LengthMismatch(ValueError):
    """Prediction and ground-truth trajectories differ in length."""


class NoScoredFrames(ValueError):
    """No frame survives init-frame exclusion and absent-ground-truth skips."""


class EmptyInput(ValueError):
    """An aggregate was asked for over an empty collection."""


class BadInterval(ValueError):
    """Invalid expected-overlap interval (needs 1 <= lo <= hi)."""


@dataclass(frozen=True)
class FrameScores:
    """Per-frame comparison of one prediction/ground-truth pair.

    Arrays are parallel and cover only scored frames.  ``frames`` holds
    1-based frame numbers (always >= 2, the init frame never scores).
    """

    frames: np.ndarray
    iou: np.ndarray
    center_err: np.ndarray
    norm_center_err: np.ndarray

    def __len__(self) -> int:
        return len(self.frames)


def _gt_scored(box: MaybeBox) -> bool:
    return box is not None and box.w > 0.0 and box.h > 0.0


def frame_scores(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> FrameScores:
    """Per-frame overlap and center errors for all scored frames.

    Raises:
        LengthMismatch: trajectories differ in length.
        NoScoredFrames: nothing to score (all ground truth absent/degenerate).
    """
    if len(pred) != len(gt):
        raise LengthMismatch(f"pred has {len(pred)} frames, gt has {len(gt)}")
    frames: list[int] = []
    ious: list[float] = []
    cerrs: list[float] = []
    nerrs: list[float] = []
    for f in range(1, len(gt)):
        g = gt[f]
        if not _gt_scored(g):
            continue
        p = pred[f]
        frames.append(f + 1)
        if p is None:
            ious.append(0.0)
            cerrs.append(math.inf)
            nerrs.append(math.inf)
        else:
            ious.append(iou(p, g))
            cerrs.append(center_error(p, g))
            nerrs.append(norm_center_error(p, g))
    if not frames:
        raise NoScoredFrames("no scored frames (check ground-truth annotations)")
    return FrameScores(
        frames=np.asarray(frames, dtype=np.int64),
        iou=np.asarray(ious, dtype=np.float64),
        center_err=np.asarray(cerrs, dtype=np.float64),
        norm_center_err=np.asarray(nerrs, dtype=np.float64),
    )


def overlap_series(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> list[float]:
    """Per-frame overlaps over scored frames, in frame order."""
    return frame_scores(pred, gt).iou.tolist()


def _auc_kernel(values: np.ndarray) -> np.ndarray:
    # g(x) = |{t in grid : t < x}| / 51, exact via the shared grid.
    return np.searchsorted(THRESHOLDS_IOU, values, side="left") / 51.0


def metric_kernel(kind: str) -> Callable[[np.ndarray], np.ndarray]:
    """Per-frame kernel for a frame-wise-mean overlap metric.

    Supported kinds: ``ao`` (identity), ``auc`` (threshold-count weight),
    ``sr50``/``sr75`` (strict-overlap indicators).
    """
    if kind == "ao":
        return lambda v: np.asarray(v, dtype=np.float64)
    if kind == "auc":
        return _auc_kernel
    if kind == "sr50":
        return lambda v: (np.asarray(v) > 0.5).astype(np.float64)
    if kind == "sr75":
        return lambda v: (np.asarray(v) > 0.75).astype(np.float64)
    raise ValueError(f"unknown metric kind {kind!r}")


def _fmean(values: np.ndarray) -> float:
    return math.fsum(values) / len(values)


def sequence_metric(kind: str, pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> float:
    """Frame-wise-mean metric of one trajectory pair (kinds of metric_kernel)."""
    scores = frame_scores(pred, gt)
    return _fmean(metric_kernel(kind)(scores.iou))


def success_auc(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> float:
    """Mean over the 51 overlap thresholds of the fraction of frames above each.

    Computed as the frame-wise mean of the threshold-count kernel; the two
    orders agree (same numerator counted by frame or by threshold).
    """
    return sequence_metric("auc", pred, gt)


def average_overlap(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> float:
    """Mean overlap over scored frames."""
    return sequence_metric("ao", pred, gt)


def success_rate(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox], tau: float) -> float:
    """Fraction of scored frames with overlap strictly above ``tau``."""
    scores = frame_scores(pred, gt)
    return _fmean((scores.iou > tau).astype(np.float64))


def precision_at(
    pred: Sequence[MaybeBox], gt: Sequence[MaybeBox], tau_px: float = PRECISION_THRESHOLD_PX
) -> float:
    """Fraction of scored frames with center error at most ``tau_px`` pixels."""
    scores = frame_scores(pred, gt)
    return _fmean((scores.center_err <= tau_px).astype(np.float64))


def _norm_precision_kernel(errors: np.ndarray) -> np.ndarray:
    # h(e) = |{t in grid : e <= t}| / 51
    below = np.searchsorted(THRESHOLDS_NORM, errors, side="left")
    return (len(THRESHOLDS_NORM) - below) / 51.0


def norm_precision(pred: Sequence[MaybeBox], gt: Sequence[MaybeBox]) -> float:
    """Mean over the normalized-error thresholds of the fraction of frames within each."""
    scores = frame_scores(pred, gt)
    return _fmean(_norm_precision_kernel(scores.norm_center_err))


@dataclass(frozen=True)
class EaoSummary:
    """No-reset expected-overlap summary: labelled eao_simplified in reports."""

    eao: float
    accuracy: float
    robustness: float


def simplified_eao(
    per_sequence_overlaps: Sequence[Sequence[float]],
    interval: tuple[int, int],
) -> EaoSummary:
    """Expected average overlap over a range of sequence lengths, no resets.

    For each length L in [lo, hi] the curve value is the average over
    sequences of ``sum(first min(L, len) overlaps) / L`` (shorter sequences
    contribute their zero-padded curve); the summary eao is the mean over L.
    Accuracy is the mean overlap over frames with positive overlap,
    robustness the fraction of frames with positive overlap.

    Raises:
        EmptyInput: no sequences, or an empty overlap curve.
        BadInterval: interval does not satisfy 1 <= lo <= hi.
    """
    if not per_sequence_overlaps:
        raise EmptyInput("no overlap curves given")
    curves = [np.asarray(c, dtype=np.float64) for c in per_sequence_overlaps]
    if any(len(c) == 0 for c in curves):
        raise EmptyInput("empty overlap curve")
    lo, hi = interval
    if lo < 1 or lo > hi:
        raise BadInterval(f"need 1 <= lo <= hi, got ({lo}, {hi})")
    curve_values = []
    for length in range(lo, hi + 1):
        per_seq = [math.fsum(c[:length]) / length for c in curves]
        curve_values.append(math.fsum(per_seq) / len(per_seq))
    eao = math.fsum(curve_values) / len(curve_values)
    all_overlaps = np.concatenate(curves)
    positive = all_overlaps[all_overlaps > 0.0]
    accuracy = math.fsum(positive) / len(positive) if len(positive) else 0.0
    robustness = len(positive) / len(all_overlaps)
    return EaoSummary(eao=eao, accuracy=accuracy, robustness=robustness)


def top1_accuracy(predicted: Sequence[str], labels: Sequence[str]) -> float:
    """Fraction of exact matches between predicted and labelled tracker ids."""
    if len(predicted) != len(labels):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(labels)} labels")
    if not labels:
        raise EmptyInput("empty evaluation set")
    hits = sum(1 for p, t in zip(predicted, labels) if p == t)
    return hits / len(labels)


@dataclass(frozen=True)
class SequenceMetrics:
    """Frame-wise-mean measures of one sequence."""

    sequence_id: str
    auc: float
    precision: float
    norm_precision: float
    ao: float
    sr50: float
    sr75: float
    frames_scored: int


def sequence_metrics(
    sequence_id: str,
    pred: Sequence[MaybeBox],
    gt: Sequence[MaybeBox],
    tau_px: float = PRECISION_THRESHOLD_PX,
) -> SequenceMetrics:
    """All per-sequence measures from one trajectory pair."""
    scores = frame_scores(pred, gt)
    return metrics_from_scores(sequence_id, scores, tau_px=tau_px)


def metrics_from_scores(
    sequence_id: str, scores: FrameScores, tau_px: float = PRECISION_THRESHOLD_PX
) -> SequenceMetrics:
    """Per-sequence measures from precomputed frame scores."""
    return SequenceMetrics(
        sequence_id=sequence_id,
        auc=_fmean(_auc_kernel(scores.iou)),
        precision=_fmean((scores.center_err <= tau_px).astype(np.float64)),
        norm_precision=_fmean(_norm_precision_kernel(scores.norm_center_err)),
        ao=_fmean(scores.iou),
        sr50=_fmean((scores.iou > 0.5).astype(np.float64)),
        sr75=_fmean((scores.iou > 0.75).astype(np.float64)),
        frames_scored=len(scores),
    )


@dataclass(frozen=True)
class MetricReport:
    """Dataset-level evaluation summary.

    ``eao``/``accuracy``/``robustness`` come from the simplified no-reset
    expected-overlap protocol and are labelled eao_simplified in all
    emitted reports.
    """

    auc: float
    precision: float
    norm_precision: float
    ao: float
    sr50: float
    sr75: float
    eao: float
    accuracy: float
    robustness: float
    frames_evaluated: int

    def __post_init__(self):
        eps = 1e-9
        for name in (
            "auc",
            "precision",
            "norm_precision",
            "ao",
            "sr50",
            "sr75",
            "eao",
            "accuracy",
            "robustness",
        ):
            value = getattr(self, name)
            if not (-eps <= value <= 1.0 + eps):
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.sr75 > self.sr50 + eps:
            raise ValueError(f"sr75={self.sr75} exceeds sr50={self.sr50}")
        if self.frames_evaluated < 0:
            raise ValueError("negative frame count")


def aggregate_report(
    per_sequence: Sequence[SequenceMetrics],
    overlap_curves: Sequence[Sequence[float]],
    eao_interval: tuple[int, int] | None = None,
) -> MetricReport:
    """Dataset summary: per-sequence means plus the expected-overlap block.

    The default expected-overlap interval spans from 1 to the longest
    overlap curve.
    """
    if not per_sequence or not overlap_curves:
        raise EmptyInput("nothing to aggregate")
    if len(per_sequence) != len(overlap_curves):
        raise LengthMismatch("per-sequence metrics and curves differ in count")

    def mean_of(field: str) -> float:
        return math.fsum(getattr(m, field) for m in per_sequence) / len(per_sequence)

    if eao_interval is None:
        eao_interval = (1, max(len(c) for c in overlap_curves))
    eao = simplified_eao(overlap_curves, eao_interval)
    return MetricReport(
        auc=mean_of("auc"),
        precision=mean_of("precision"),
        norm_precision=mean_of("norm_precision"),
        ao=mean_of("ao"),
        sr50=mean_of("sr50"),
        sr75=mean_of("sr75"),
        eao=eao.eao,
        accuracy=eao.accuracy,
        robustness=eao.robustness,
        frames_evaluated=sum(m.frames_scored for m in per_sequence),
    )


def exact_sum(values: Sequence[float]) -> Fraction:
    """Exact rational sum of floats; used for overlap-sum tie-breaks."""
    total = Fraction(0)
    for v in values:
        total += Fraction(v)
    return total
