"""Built-in best-tracker predictor and the external-predictor interchange.

The built-in model is a convex multinomial logistic regression over
hand-crafted sequence features (init-box statistics, early-motion
statistics from the first frames, attribute one-hots and a length
bucket).  It trains by full-batch gradient descent from zero-initialized
weights, which makes training deterministic and the loss curve convex.
Deep predictors plug in through the prediction interchange file instead;
both sides speak the same line-delimited schema.

Features only ever look at the declared window of early frames -- never
at later ground truth -- so the predictor is usable at inference time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset_io import ResultSet, SequenceRecord
from .geometry import MaybeBox, center_error
from .labels import SelectionLabel, normalize, onehot
from .metrics import EmptyInput, frame_scores, metric_kernel

__all__ = [
    "Featurizer",
    "ClassifierModel",
    "PredictionRecord",
    "TrainingConfig",
    "NonFiniteLoss",
    "EmptyTrainingSet",
    "UnknownTracker",
    "DuplicateRecord",
    "MissingPrediction",
    "loss_and_grad",
    "softmax",
    "train",
    "predict",
    "evaluate_top1_video",
    "evaluate_top1_frame",
    "interval_winner",
    "scoring_intervals",
    "export_predictions",
    "write_predictions",
    "load_external_predictions",
]


class NonFiniteLoss(ValueError):
    """Training loss left the finite range (learning rate too high)."""


class EmptyTrainingSet(ValueError):
    """No usable (non-degenerate) training examples."""


class UnknownTracker(ValueError):
    """Prediction record names a tracker missing from the manifest."""


class DuplicateRecord(ValueError):
    """Two prediction records for the same (sequence, frame)."""


class MissingPrediction(KeyError):
    """No prediction record for a required (sequence, frame)."""


LENGTH_BUCKETS = (60, 240, 960)


@dataclass(frozen=True)
class Featurizer:
    """Maps a sequence (or an explicit box window) to a fixed-length vector.

    Positions and sizes are normalized by the image extent when known,
    otherwise by the smallest extent containing the window boxes.
    Normalized components are clipped to [0, 1]; the two scale-change
    ratios are left unclipped (a box doubling in width reads as 2.0).
    """

    attributes: tuple[str, ...]
    window: int = 5

    @property
    def dimension(self) -> int:
        return 8 + len(LENGTH_BUCKETS) + 1 + len(self.attributes)

    def feature_names(self) -> list[str]:
        names = [
            "rel_size",
            "aspect",
            "center_x",
            "center_y",
            "mean_step",
            "max_step",
            "scale_change_w",
            "scale_change_h",
        ]
        names += [f"len_bucket_{i}" for i in range(len(LENGTH_BUCKETS) + 1)]
        names += [f"attr_{a}" for a in self.attributes]
        return names

    def features(
        self, seq: SequenceRecord, boxes: Sequence[MaybeBox] | None = None
    ) -> np.ndarray:
        """Feature vector from the first ``window`` frames (or a given window)."""
        window = tuple(boxes) if boxes is not None else seq.gt[: self.window]
        window = window[: self.window]
        present = [b for b in window if b is not None]
        if seq.image_size is not None:
            ref_w, ref_h = seq.image_size
        elif present:
            ref_w = max(b.x + b.w for b in present)
            ref_h = max(b.y + b.h for b in present)
        else:
            ref_w = ref_h = 1.0
        ref_w = max(ref_w, 1e-9)
        ref_h = max(ref_h, 1e-9)
        diag = math.hypot(ref_w, ref_h)

        out = np.zeros(self.dimension, dtype=np.float64)
        if present:
            init = present[0]
            cx, cy = init.center
            out[0] = _clip01(init.area / (ref_w * ref_h))
            out[1] = init.w / (init.w + init.h) if init.w + init.h > 0 else 0.0
            out[2] = _clip01(cx / ref_w)
            out[3] = _clip01(cy / ref_h)
            if len(present) >= 2:
                steps = [
                    center_error(a, b) / diag for a, b in zip(present, present[1:])
                ]
                out[4] = _clip01(sum(steps) / len(steps))
                out[5] = _clip01(max(steps))
            last = present[-1]
            out[6] = last.w / init.w if init.w > 0 else 1.0
            out[7] = last.h / init.h if init.h > 0 else 1.0
        bucket = sum(1 for edge in LENGTH_BUCKETS if seq.frame_count >= edge)
        out[8 + bucket] = 1.0
        base = 8 + len(LENGTH_BUCKETS) + 1
        for i, tag in enumerate(self.attributes):
            if tag in seq.attributes:
                out[base + i] = 1.0
        return out


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 300
    lr: float = 0.5
    l2: float = 1e-4
    seed: int = 0


@dataclass(frozen=True)
class PredictionRecord:
    """One predictor decision: scores per tracker and the chosen one."""

    sequence_id: str
    frame_index: int
    scores: dict[str, float]
    chosen: str


@dataclass
class ClassifierModel:
    """Multinomial logistic regression with feature standardization."""

    trackers: tuple[str, ...]
    featurizer: Featurizer
    weights: np.ndarray  # (D, N)
    bias: np.ndarray  # (N,)
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    config: TrainingConfig = field(default_factory=TrainingConfig)
    loss_curve: tuple[float, ...] = ()
    active_classes: tuple[bool, ...] = ()

    def save(self, path: str | Path) -> None:
        payload = {
            "trackers": list(self.trackers),
            "attributes": list(self.featurizer.attributes),
            "window": self.featurizer.window,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "config": {
                "epochs": self.config.epochs,
                "lr": self.config.lr,
                "l2": self.config.l2,
                "seed": self.config.seed,
            },
            "loss_curve": list(self.loss_curve),
            "active_classes": list(self.active_classes),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        payload = json.loads(Path(path).read_text())
        return cls(
            trackers=tuple(payload["trackers"]),
            featurizer=Featurizer(
                attributes=tuple(payload["attributes"]), window=int(payload["window"])
            ),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=np.asarray(payload["bias"], dtype=np.float64),
            feature_mean=np.asarray(payload["feature_mean"], dtype=np.float64),
            feature_scale=np.asarray(payload["feature_scale"], dtype=np.float64),
            config=TrainingConfig(**payload["config"]),
            loss_curve=tuple(payload["loss_curve"]),
            active_classes=tuple(bool(b) for b in payload["active_classes"]),
        )


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy loss (plus L2 on weights) and its analytic gradients.

    ``targets`` is the one-hot matrix (n, N).  Kept as a pure function so
    the gradient can be checked against finite differences.
    """
    n = features.shape[0]
    probs = softmax(features @ weights + bias)
    eps = 1e-300  # guards log(0); degenerate only at absurd weight scales
    loss = -float(np.sum(targets * np.log(probs + eps))) / n
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    delta = (probs - targets) / n
    grad_w = features.T @ delta + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train(
    features: np.ndarray,
    labels: Sequence[SelectionLabel],
    trackers: Sequence[str],
    featurizer: Featurizer,
    config: TrainingConfig = TrainingConfig(),
) -> ClassifierModel:
    """Fit the classifier by full-batch gradient descent.

    Degenerate-labeled videos are excluded.  Weights start at zero, so
    training is deterministic and the recorded loss curve is monotone
    non-increasing for small learning rates on this convex problem.

    Raises:
        EmptyTrainingSet: nothing left after dropping degenerate labels.
        NonFiniteLoss: loss diverged.
    """
    keep = [i for i, lab in enumerate(labels) if not lab.degenerate]
    if not keep:
        raise EmptyTrainingSet("all labels degenerate or no labels given")
    x = np.asarray(features, dtype=np.float64)[keep]
    winners = np.asarray([labels[i].winner_index for i in keep], dtype=np.int64)
    n_classes = len(trackers)
    y = np.zeros((len(keep), n_classes), dtype=np.float64)
    y[np.arange(len(keep)), winners] = 1.0

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    xs = (x - mean) / scale

    weights = np.zeros((xs.shape[1], n_classes), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)
    curve = []
    for _ in range(config.epochs):
        loss, grad_w, grad_b = loss_and_grad(weights, bias, xs, y, config.l2)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"loss became {loss}")
        curve.append(loss)
        weights -= config.lr * grad_w
        bias -= config.lr * grad_b
    active = tuple(bool((winners == c).any()) for c in range(n_classes))
    return ClassifierModel(
        trackers=tuple(trackers),
        featurizer=featurizer,
        weights=weights,
        bias=bias,
        feature_mean=mean,
        feature_scale=scale,
        config=config,
        loss_curve=tuple(curve),
        active_classes=active,
    )


def predict(
    model: ClassifierModel,
    feature: np.ndarray,
    sequence_id: str = "",
    frame_index: int = 1,
    pool: Sequence[str] | None = None,
) -> PredictionRecord:
    """Score all trackers for one feature vector and pick the winner.

    The argmax is restricted to ``pool`` when given; ties break toward
    the lower manifest index.
    """
    xs = (np.asarray(feature, dtype=np.float64) - model.feature_mean) / model.feature_scale
    scores = softmax(xs @ model.weights + model.bias)
    chosen = choose_from_scores(
        dict(zip(model.trackers, scores.tolist())), pool if pool is not None else model.trackers
    )
    return PredictionRecord(
        sequence_id=sequence_id,
        frame_index=frame_index,
        scores={t: float(s) for t, s in zip(model.trackers, scores)},
        chosen=chosen,
    )


def choose_from_scores(scores: Mapping[str, float], candidates: Sequence[str]) -> str:
    """First candidate attaining the maximum score (candidate order breaks ties)."""
    if not candidates:
        raise EmptyInput("no candidate trackers")
    missing = [t for t in candidates if t not in scores]
    if missing:
        raise UnknownTracker(f"no scores for {missing}")
    best = candidates[0]
    for t in candidates[1:]:
        if scores[t] > scores[best]:
            best = t
    return best


def interval_winner(
    seq: SequenceRecord,
    results: Sequence[ResultSet],
    start: int,
    end: int,
    metric: str = "auc",
) -> SelectionLabel | None:
    """Label restricted to frames [start, end] (1-based, inclusive).

    Returns None when no tracker has a scored frame inside the interval.
    """
    kernel = metric_kernel(metric)
    scores = []
    any_frames = False
    for result in results:
        fs = frame_scores(result.entries[seq.id], seq.gt)
        mask = (fs.frames >= start) & (fs.frames <= end)
        if mask.any():
            any_frames = True
            scores.append(math.fsum(kernel(fs.iou[mask])) / int(mask.sum()))
        else:
            scores.append(0.0)
    if not any_frames:
        return None
    trackers = [r.tracker_id for r in results]
    probs, degenerate = normalize(scores)
    vec, winner = onehot(probs)
    return SelectionLabel(
        video_id=seq.id,
        metric=metric,
        scores=tuple(scores),
        probs=probs,
        onehot=vec,
        winner_index=winner,
        winner_id=trackers[winner],
        degenerate=degenerate,
    )


def evaluate_top1_video(
    model: ClassifierModel,
    sequences: Sequence[SequenceRecord],
    labels: Mapping[str, SelectionLabel],
    pool: Sequence[str] | None = None,
) -> float:
    """Fraction of videos whose predicted tracker matches the label winner."""
    if not sequences:
        raise EmptyInput("empty evaluation set")
    hits = 0
    for seq in sequences:
        label = labels[seq.id]
        record = predict(model, model.featurizer.features(seq), seq.id, 1, pool)
        hits += record.chosen == label.winner_id
    return hits / len(sequences)


def evaluate_top1_frame(
    model: ClassifierModel,
    sequences: Sequence[SequenceRecord],
    results: Sequence[ResultSet],
    k: int = 5,
    metric: str = "auc",
    pool: Sequence[str] | None = None,
) -> float:
    """Per-interval top-1 accuracy against interval-restricted oracle winners.

    Predictions are re-made at each interval start; the first interval
    uses the init window of ground truth, later intervals use the
    currently chosen tracker's trailing boxes (ground truth is unknown
    mid-sequence).
    """
    if not sequences:
        raise EmptyInput("empty evaluation set")
    by_tracker = {r.tracker_id: r for r in results}
    hits = 0
    total = 0
    for seq in sequences:
        current: str | None = None
        for start, end in scoring_intervals(seq.frame_count, k):
            if current is None:
                boxes: Sequence[MaybeBox] = seq.gt[: model.featurizer.window]
            else:
                lo = max(0, start - 1 - model.featurizer.window)
                boxes = by_tracker[current].entries[seq.id][lo : start - 1]
            record = predict(
                model, model.featurizer.features(seq, boxes=boxes), seq.id, start, pool
            )
            current = record.chosen
            label = interval_winner(seq, results, start, end, metric)
            if label is None:
                continue
            total += 1
            hits += record.chosen == label.winner_id
    if total == 0:
        raise EmptyInput("no scorable intervals")
    return hits / total


def scoring_intervals(frame_count: int, k: int) -> list[tuple[int, int]]:
    """Consecutive intervals of k scored frames tiling frames [2..m], 1-based."""
    if k < 1:
        raise ValueError(f"interval length must be >= 1, got {k}")
    return [(s, min(s + k - 1, frame_count)) for s in range(2, frame_count + 1, k)]


def export_predictions(
    model: ClassifierModel,
    sequences: Sequence[SequenceRecord],
    results: Sequence[ResultSet] | None = None,
    level: str = "video",
    k: int = 5,
    pool: Sequence[str] | None = None,
) -> list[PredictionRecord]:
    """Interchange records for a dataset: one per video, or one per interval.

    Video-level records carry frame_index 1; frame-level records sit at
    every interval start, re-using the currently chosen tracker's
    trailing boxes as the feature window (``results`` required).
    """
    records: list[PredictionRecord] = []
    for seq in sorted(sequences, key=lambda s: s.id):
        if level == "video":
            records.append(predict(model, model.featurizer.features(seq), seq.id, 1, pool))
            continue
        if results is None:
            raise ValueError("frame-level export needs tracker results for windows")
        by_tracker = {r.tracker_id: r for r in results}
        current: str | None = None
        for start, _end in scoring_intervals(seq.frame_count, k):
            if current is None:
                boxes: Sequence[MaybeBox] = seq.gt[: model.featurizer.window]
            else:
                lo = max(0, start - 1 - model.featurizer.window)
                boxes = by_tracker[current].entries[seq.id][lo : start - 1]
            record = predict(
                model, model.featurizer.features(seq, boxes=boxes), seq.id, start, pool
            )
            current = record.chosen
            records.append(record)
    return records


def write_predictions(path: str | Path, records: Sequence[PredictionRecord]) -> None:
    """Write the prediction interchange file (one JSON record per line)."""
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "sequence_id": r.sequence_id,
                    "frame_index": r.frame_index,
                    "scores": {t: float(s) for t, s in sorted(r.scores.items())},
                    "chosen": r.chosen,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_external_predictions(
    path: str | Path, manifest_trackers: Sequence[str]
) -> list[PredictionRecord]:
    """Read and validate an interchange file from any predictor.

    Raises:
        UnknownTracker: a record names a tracker outside the manifest.
        DuplicateRecord: two records for the same (sequence, frame).
    """
    known = set(manifest_trackers)
    seen: set[tuple[str, int]] = set()
    records: list[PredictionRecord] = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        row = json.loads(line)
        scores = {str(t): float(s) for t, s in row["scores"].items()}
        chosen = str(row["chosen"])
        bad = [t for t in list(scores) + [chosen] if t not in known]
        if bad:
            raise UnknownTracker(f"line {line_no}: unknown tracker(s) {sorted(set(bad))}")
        key = (str(row["sequence_id"]), int(row["frame_index"]))
        if key in seen:
            raise DuplicateRecord(f"line {line_no}: duplicate record for {key}")
        seen.add(key)
        records.append(
            PredictionRecord(
                sequence_id=key[0], frame_index=key[1], scores=scores, chosen=chosen
            )
        )
    return records
