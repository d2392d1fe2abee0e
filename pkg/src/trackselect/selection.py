"""Best-of-pool meta-tracker: selection policies, splicing and evaluation.

A meta-tracker's output on each video is the output of one tracker
selected from a pool -- chosen once per video (video level) or re-chosen
every k scored frames (frame level, default k = 5).  Frame-level output
is assembled by splicing the chosen trackers' precomputed trajectories
interval by interval; there is no live re-initialization hand-off.

The oracle policy maximizes the per-frame metric kernel (overlap for AO,
threshold-count weight for AUC, indicator for SR) summed over each
interval.  Because every supported metric is a frame-wise mean, interval-
wise maximization dominates any single tracker on every sequence -- the
evaluation keeps that guarantee exact in floating point by comparing
interval sums with an exact rational tie-break.

Each selection decision is one predictor evaluation; plans account for
them at 0.84 s apiece.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .dataset_io import Manifest, ResultSet, SequenceRecord, Trajectory
from .metrics import (
    FrameScores,
    MetricReport,
    SequenceMetrics,
    aggregate_report,
    exact_sum,
    frame_scores,
    metric_kernel,
    metrics_from_scores,
)
from .predictor import (
    ClassifierModel,
    MissingPrediction,
    PredictionRecord,
    choose_from_scores,
    predict,
    scoring_intervals,
)

__all__ = [
    "OVERHEAD_PER_EVAL_S",
    "EmptyPool",
    "MissingTrajectory",
    "BadPoolSize",
    "OraclePolicy",
    "FixedPolicy",
    "RandomPolicy",
    "PredictedPolicy",
    "Policy",
    "Interval",
    "SelectionPlan",
    "PolicyEvaluation",
    "AblationRow",
    "select_video_level",
    "select_frame_level",
    "splice",
    "evaluate_policy",
    "nested_pools",
    "ablate_pool_size",
    "write_plans",
    "read_plans",
    "pool_from_manifest",
]

# Cost of one predictor evaluation, in seconds.
OVERHEAD_PER_EVAL_S = 0.84


class EmptyPool(ValueError):
    """Selection asked over an empty tracker pool."""


class MissingTrajectory(KeyError):
    """A chosen tracker has no stored trajectory for a sequence."""


class BadPoolSize(ValueError):
    """Nested-pool size outside the rank list."""


@dataclass(frozen=True)
class OraclePolicy:
    """Upper bound: selects with ground truth (evaluation mode only)."""

    metric: str = "auc"  # ao | auc | sr50 | sr75


@dataclass(frozen=True)
class FixedPolicy:
    """Always the same tracker."""

    tracker_id: str


@dataclass(frozen=True)
class RandomPolicy:
    """Uniform choice per decision, reproducible from the seed."""

    seed: int = 0


@dataclass(frozen=True)
class PredictedPolicy:
    """Classifier-driven selection: built-in model or external predictions.

    External predictions must contain a record at frame 1 for video-level
    use and at every interval start for frame-level use.  The policy
    never reads ground truth beyond the model's feature window.
    """

    model: ClassifierModel | None = None
    predictions: Mapping[tuple[str, int], PredictionRecord] | None = None

    def __post_init__(self):
        if (self.model is None) == (self.predictions is None):
            raise ValueError("provide exactly one of model or predictions")


Policy = Union[OraclePolicy, FixedPolicy, RandomPolicy, PredictedPolicy]


@dataclass(frozen=True)
class Interval:
    """Frames [start, end] (1-based, inclusive) assigned to one tracker."""

    start: int
    end: int
    tracker: str


@dataclass(frozen=True)
class SelectionPlan:
    """Per-sequence tracker choices plus prediction-overhead accounting."""

    sequence_id: str
    level: str  # "video" | "frame"
    interval: int | None  # k for frame level, None for video level
    choices: tuple[Interval, ...]
    n_e: int

    def __post_init__(self):
        if self.level not in ("video", "frame"):
            raise ValueError(f"bad level {self.level!r}")
        if self.level == "video" and self.n_e != 1:
            raise ValueError("video-level plan must have n_e == 1")
        last = None
        for iv in self.choices:
            expected = 2 if last is None else last + 1
            if iv.start != expected or iv.end < iv.start:
                raise ValueError(f"{self.sequence_id}: choices do not tile [2..m]")
            last = iv.end

    @property
    def overhead_s(self) -> float:
        return OVERHEAD_PER_EVAL_S * self.n_e

    @property
    def frame_count(self) -> int:
        return self.choices[-1].end if self.choices else 1


def _seeded_choice(pool: Sequence[str], *key_parts) -> str:
    digest = hashlib.sha256(":".join(str(p) for p in key_parts).encode()).digest()
    return pool[int.from_bytes(digest[:8], "big") % len(pool)]


def _pool_index(results: Sequence[ResultSet], pool: Sequence[str]) -> dict[str, ResultSet]:
    if not pool:
        raise EmptyPool("no trackers in pool")
    by_id = {r.tracker_id: r for r in results}
    missing = [t for t in pool if t not in by_id]
    if missing:
        raise MissingTrajectory(f"no results for pool tracker(s) {missing}")
    return {t: by_id[t] for t in pool}


def _trajectory(rs: ResultSet, seq_id: str) -> Trajectory:
    traj = rs.entries.get(seq_id)
    if traj is None:
        raise MissingTrajectory(f"tracker {rs.tracker_id} has no trajectory for {seq_id}")
    return traj


def _argmax_exact(
    pool: Sequence[str], sums: Mapping[str, float], values: Mapping[str, np.ndarray]
) -> str:
    """First pool tracker attaining the maximum interval sum.

    Rounded (fsum) sums decide; exact rational sums only break rounded
    ties, keeping interval-wise dominance exact in floating point.
    """
    best = max(sums[t] for t in pool)
    tied = [t for t in pool if sums[t] == best]
    if len(tied) == 1:
        return tied[0]
    exacts = {t: exact_sum(values[t]) for t in tied}
    best_exact = max(exacts.values())
    for t in tied:
        if exacts[t] == best_exact:
            return t
    raise AssertionError("unreachable")


def select_video_level(
    seq: SequenceRecord,
    results: Sequence[ResultSet],
    pool: Sequence[str],
    policy: Policy,
) -> SelectionPlan:
    """Choose one tracker for the whole sequence (one predictor evaluation)."""
    index = _pool_index(results, pool)
    if isinstance(policy, OraclePolicy):
        kernel = metric_kernel(policy.metric)
        vals = {
            t: kernel(frame_scores(_trajectory(rs, seq.id), seq.gt).iou)
            for t, rs in index.items()
        }
        # The mean denominator is shared, so comparing sums equals
        # comparing per-sequence metrics.
        sums = {t: math.fsum(v) for t, v in vals.items()}
        chosen = _argmax_exact(pool, sums, vals)
    elif isinstance(policy, FixedPolicy):
        if policy.tracker_id not in index:
            raise EmptyPool(f"fixed tracker {policy.tracker_id!r} not in pool")
        chosen = policy.tracker_id
    elif isinstance(policy, RandomPolicy):
        chosen = _seeded_choice(pool, policy.seed, seq.id, "video")
    else:
        chosen = _predicted_choice(policy, seq, pool, frame_index=1, window_boxes=None)
    return SelectionPlan(
        sequence_id=seq.id,
        level="video",
        interval=None,
        choices=(Interval(2, seq.frame_count, chosen),),
        n_e=1,
    )


def _predicted_choice(
    policy: PredictedPolicy,
    seq: SequenceRecord,
    pool: Sequence[str],
    frame_index: int,
    window_boxes,
) -> str:
    if policy.model is not None:
        feature = policy.model.featurizer.features(seq, boxes=window_boxes)
        return predict(policy.model, feature, seq.id, frame_index, pool).chosen
    assert policy.predictions is not None
    record = policy.predictions.get((seq.id, frame_index))
    if record is None:
        raise MissingPrediction(f"no prediction for ({seq.id}, frame {frame_index})")
    return choose_from_scores(record.scores, pool)


def select_frame_level(
    seq: SequenceRecord,
    results: Sequence[ResultSet],
    pool: Sequence[str],
    policy: Policy,
    k: int = 5,
) -> SelectionPlan:
    """Re-choose the tracker every k scored frames (last interval may be short)."""
    index = _pool_index(results, pool)
    intervals = scoring_intervals(seq.frame_count, k)
    choices: list[Interval] = []
    if isinstance(policy, OraclePolicy):
        kernel = metric_kernel(policy.metric)
        scores = {t: frame_scores(_trajectory(rs, seq.id), seq.gt) for t, rs in index.items()}
        vals = {t: kernel(s.iou) for t, s in scores.items()}
        frames = next(iter(scores.values())).frames  # shared scored-frame set
        for start, end in intervals:
            mask = (frames >= start) & (frames <= end)
            ivals = {t: v[mask] for t, v in vals.items()}
            sums = {t: math.fsum(v) for t, v in ivals.items()}
            choices.append(Interval(start, end, _argmax_exact(pool, sums, ivals)))
    elif isinstance(policy, FixedPolicy):
        if policy.tracker_id not in index:
            raise EmptyPool(f"fixed tracker {policy.tracker_id!r} not in pool")
        choices = [Interval(s, e, policy.tracker_id) for s, e in intervals]
    elif isinstance(policy, RandomPolicy):
        choices = [
            Interval(s, e, _seeded_choice(pool, policy.seed, seq.id, j))
            for j, (s, e) in enumerate(intervals)
        ]
    else:
        current: str | None = None
        window = policy.model.featurizer.window if policy.model is not None else 5
        for start, end in intervals:
            if current is None:
                boxes = seq.gt[:window]
            else:
                lo = max(0, start - 1 - window)
                boxes = _trajectory(index[current], seq.id)[lo : start - 1]
            current = _predicted_choice(policy, seq, pool, start, boxes)
            choices.append(Interval(start, end, current))
    return SelectionPlan(
        sequence_id=seq.id,
        level="frame",
        interval=k,
        choices=tuple(choices),
        n_e=len(intervals),
    )


def splice(plan: SelectionPlan, results: Sequence[ResultSet], gt: Trajectory) -> Trajectory:
    """Assemble the meta-tracker trajectory from a plan.

    Frame 1 comes from ground truth (the given init box); every other
    frame is copied from the tracker chosen for its interval.
    """
    by_id = {r.tracker_id: r for r in results}
    boxes = [gt[0]]
    for iv in plan.choices:
        if iv.tracker not in by_id:
            raise MissingTrajectory(f"no results for {iv.tracker!r}")
        traj = _trajectory(by_id[iv.tracker], plan.sequence_id)
        boxes.extend(traj[iv.start - 1 : iv.end])
    if len(boxes) != len(gt):
        raise ValueError(
            f"{plan.sequence_id}: spliced {len(boxes)} frames, expected {len(gt)}"
        )
    return tuple(boxes)


@dataclass(frozen=True)
class PolicyEvaluation:
    """Metrics, plans and overhead/fps accounting for one policy run."""

    report: MetricReport
    per_sequence: tuple[SequenceMetrics, ...]
    plans: tuple[SelectionPlan, ...]
    frame_scores: tuple[FrameScores, ...]
    total_overhead_s: float
    simulated_runtime_s: float
    fps: float


def evaluate_policy(
    sequences: Sequence[SequenceRecord],
    results: Sequence[ResultSet],
    pool: Sequence[str],
    policy: Policy,
    level: str = "video",
    k: int = 5,
    frame_costs: Mapping[str, float] | None = None,
    eao_interval: tuple[int, int] | None = None,
) -> PolicyEvaluation:
    """Run a selection policy over a dataset and score the spliced output.

    Sequences are processed in sorted-id order so reports are
    deterministic regardless of input order.  ``frame_costs`` maps
    tracker id to simulated seconds per frame (manifest values; default
    1/50 s); fps = total frames / (simulated runtime + prediction
    overhead).
    """
    if not sequences:
        raise ValueError("no sequences to evaluate")
    costs = dict(frame_costs or {})
    per_seq: list[SequenceMetrics] = []
    plans: list[SelectionPlan] = []
    all_scores: list[FrameScores] = []
    curves: list[list[float]] = []
    runtime = 0.0
    overhead = 0.0
    total_frames = 0
    for seq in sorted(sequences, key=lambda s: s.id):
        if level == "video":
            plan = select_video_level(seq, results, pool, policy)
        elif level == "frame":
            plan = select_frame_level(seq, results, pool, policy, k)
        else:
            raise ValueError(f"bad level {level!r}")
        meta_traj = splice(plan, results, seq.gt)
        scores = frame_scores(meta_traj, seq.gt)
        per_seq.append(metrics_from_scores(seq.id, scores))
        curves.append(scores.iou.tolist())
        all_scores.append(scores)
        plans.append(plan)
        overhead += plan.overhead_s
        total_frames += seq.frame_count
        for iv in plan.choices:
            runtime += (iv.end - iv.start + 1) * costs.get(iv.tracker, 1.0 / 50.0)
    fps = total_frames / (runtime + overhead) if runtime + overhead > 0 else math.inf
    return PolicyEvaluation(
        report=aggregate_report(per_seq, curves, eao_interval),
        per_sequence=tuple(per_seq),
        plans=tuple(plans),
        frame_scores=tuple(all_scores),
        total_overhead_s=overhead,
        simulated_runtime_s=runtime,
        fps=fps,
    )


def nested_pools(rank_list: Sequence[str], sizes: Sequence[int]) -> list[tuple[str, ...]]:
    """Prefix pools of a fixed tracker ranking; Bof(n) is nested in Bof(n')."""
    pools = []
    for size in sizes:
        if size < 1 or size > len(rank_list):
            raise BadPoolSize(f"size {size} outside rank list of {len(rank_list)}")
        pools.append(tuple(rank_list[:size]))
    return pools


@dataclass(frozen=True)
class AblationRow:
    pool_size: int
    video: float
    frame: float


def ablate_pool_size(
    sequences: Sequence[SequenceRecord],
    results: Sequence[ResultSet],
    rank_list: Sequence[str],
    sizes: Sequence[int] = (3, 6, 9, 12, 15, 17),
    metric: str = "auc",
    k: int = 5,
    frame_costs: Mapping[str, float] | None = None,
) -> list[AblationRow]:
    """Oracle meta-tracker score per nested pool size, at both levels."""
    field = {"auc": "auc", "ao": "ao", "sr50": "sr50", "sr75": "sr75"}[metric]
    rows = []
    for pool in nested_pools(rank_list, sizes):
        values = {}
        for level in ("video", "frame"):
            ev = evaluate_policy(
                sequences,
                results,
                pool,
                OraclePolicy(metric),
                level=level,
                k=k,
                frame_costs=frame_costs,
            )
            values[level] = getattr(ev.report, field)
        rows.append(AblationRow(pool_size=len(pool), video=values["video"], frame=values["frame"]))
    return rows


def write_plans(path: str | Path, plans: Sequence[SelectionPlan]) -> None:
    """Audit file: one JSON record per sequence plan."""
    lines = []
    for plan in plans:
        lines.append(
            json.dumps(
                {
                    "sequence_id": plan.sequence_id,
                    "level": plan.level,
                    "interval": plan.interval,
                    "choices": [
                        {"start": iv.start, "end": iv.end, "tracker": iv.tracker}
                        for iv in plan.choices
                    ],
                    "n_e": plan.n_e,
                    "overhead_s": plan.overhead_s,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_plans(path: str | Path) -> list[SelectionPlan]:
    plans = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        plans.append(
            SelectionPlan(
                sequence_id=row["sequence_id"],
                level=row["level"],
                interval=row["interval"],
                choices=tuple(
                    Interval(c["start"], c["end"], c["tracker"]) for c in row["choices"]
                ),
                n_e=int(row["n_e"]),
            )
        )
    return plans


def pool_from_manifest(manifest: Manifest, pool_arg: str | None) -> tuple[str, ...]:
    """Resolve a CLI pool argument (comma list) against the manifest order."""
    if not pool_arg:
        return manifest.trackers
    wanted = [t.strip() for t in pool_arg.split(",") if t.strip()]
    unknown = [t for t in wanted if t not in manifest.trackers]
    if unknown:
        raise EmptyPool(f"unknown pool tracker(s) {unknown}")
    return tuple(wanted)
