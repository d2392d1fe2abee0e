"""Report bundles: metric tables, winner histograms, curve data and figures.

A bundle carries everything one evaluation run produced, stamped with the
manifest content hash so numbers are never compared across silently
different datasets.  Emission is byte-deterministic for the delimited
outputs (JSON, JSON lines, CSV, curve data); figures are rendered to PNG
next to them for quick inspection but are not part of the determinism
contract.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from matplotlib.figure import Figure

from .dataset_io import SequenceRecord
from .labels import SelectionLabel
from .metrics import (
    MetricReport,
    SequenceMetrics,
    THRESHOLDS_IOU,
    THRESHOLDS_NORM,
    FrameScores,
)
from .selection import AblationRow, PolicyEvaluation

__all__ = [
    "ReportBundle",
    "attribute_histogram",
    "success_curve",
    "precision_curve",
    "norm_precision_curve",
    "build_bundle",
    "bundle_to_json",
    "bundle_from_json",
    "emit",
    "write_ablation",
]

PRECISION_CURVE_PX = tuple(float(t) for t in range(51))

METRIC_FIELDS = (
    "auc",
    "precision",
    "norm_precision",
    "ao",
    "sr50",
    "sr75",
    "eao_simplified",
    "accuracy",
    "robustness",
)


def attribute_histogram(
    labels: Sequence[SelectionLabel], sequences: Sequence[SequenceRecord]
) -> dict[str, dict[str, int]]:
    """Count winning trackers per attribute.

    A sequence bearing several attributes contributes to each of them, so
    the counts under one attribute sum to the number of sequences tagged
    with it.
    """
    by_id = {seq.id: seq for seq in sequences}
    hist: dict[str, dict[str, int]] = {}
    for label in labels:
        seq = by_id.get(label.video_id)
        if seq is None:
            continue
        for tag in sorted(seq.attributes):
            bucket = hist.setdefault(tag, {})
            bucket[label.winner_id] = bucket.get(label.winner_id, 0) + 1
    return hist


def _mean_fraction_curve(
    per_seq_values: Sequence[np.ndarray], thresholds: Sequence[float], mode: str
) -> list[tuple[float, float]]:
    points = []
    for t in thresholds:
        fracs = []
        for values in per_seq_values:
            if mode == "gt":
                fracs.append(float(np.mean(values > t)))
            else:
                fracs.append(float(np.mean(values <= t)))
        points.append((float(t), math.fsum(fracs) / len(fracs)))
    return points


def success_curve(scores: Sequence[FrameScores]) -> list[tuple[float, float]]:
    """(overlap threshold, mean fraction of frames above it) pairs."""
    return _mean_fraction_curve([s.iou for s in scores], THRESHOLDS_IOU.tolist(), "gt")


def precision_curve(scores: Sequence[FrameScores]) -> list[tuple[float, float]]:
    """(center-error threshold px, mean fraction of frames within it) pairs."""
    return _mean_fraction_curve([s.center_err for s in scores], PRECISION_CURVE_PX, "le")


def norm_precision_curve(scores: Sequence[FrameScores]) -> list[tuple[float, float]]:
    """(normalized-error threshold, mean fraction within it) pairs."""
    return _mean_fraction_curve(
        [s.norm_center_err for s in scores], THRESHOLDS_NORM.tolist(), "le"
    )


@dataclass(frozen=True)
class ReportBundle:
    """Everything one evaluation run produced, ready to serialize."""

    metadata: dict
    aggregate: dict[str, float]
    per_sequence: tuple[dict, ...]
    histogram: dict[str, dict[str, int]]
    curves: dict[str, tuple[tuple[float, float], ...]]
    baselines: dict[str, dict[str, float]] = field(default_factory=dict)
    overhead: dict[str, float] = field(default_factory=dict)


def _report_row(report: MetricReport) -> dict[str, float]:
    return {
        "auc": report.auc,
        "precision": report.precision,
        "norm_precision": report.norm_precision,
        "ao": report.ao,
        "sr50": report.sr50,
        "sr75": report.sr75,
        "eao_simplified": report.eao,
        "accuracy": report.accuracy,
        "robustness": report.robustness,
        "frames_evaluated": report.frames_evaluated,
    }


def _sequence_row(m: SequenceMetrics) -> dict:
    return {
        "sequence_id": m.sequence_id,
        "auc": m.auc,
        "precision": m.precision,
        "norm_precision": m.norm_precision,
        "ao": m.ao,
        "sr50": m.sr50,
        "sr75": m.sr75,
        "frames_scored": m.frames_scored,
    }


def build_bundle(
    evaluation: PolicyEvaluation,
    metadata: Mapping[str, object],
    labels: Sequence[SelectionLabel] = (),
    sequences: Sequence[SequenceRecord] = (),
    baselines: Mapping[str, MetricReport] | None = None,
) -> ReportBundle:
    """Assemble the full bundle from one policy evaluation."""
    hist = attribute_histogram(labels, sequences) if labels and sequences else {}
    return ReportBundle(
        metadata=dict(metadata),
        aggregate=_report_row(evaluation.report),
        per_sequence=tuple(_sequence_row(m) for m in evaluation.per_sequence),
        histogram=hist,
        curves={
            "success": tuple(success_curve(evaluation.frame_scores)),
            "precision": tuple(precision_curve(evaluation.frame_scores)),
            "norm_precision": tuple(norm_precision_curve(evaluation.frame_scores)),
        },
        baselines={t: _report_row(r) for t, r in (baselines or {}).items()},
        overhead={
            "total_overhead_s": evaluation.total_overhead_s,
            "simulated_runtime_s": evaluation.simulated_runtime_s,
            "fps": evaluation.fps,
        },
    )


def bundle_to_json(bundle: ReportBundle) -> str:
    payload = {
        "metadata": bundle.metadata,
        "aggregate": bundle.aggregate,
        "per_sequence": list(bundle.per_sequence),
        "histogram": bundle.histogram,
        "curves": {k: [list(p) for p in v] for k, v in bundle.curves.items()},
        "baselines": bundle.baselines,
        "overhead": bundle.overhead,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def bundle_from_json(text: str) -> ReportBundle:
    payload = json.loads(text)
    return ReportBundle(
        metadata=payload["metadata"],
        aggregate=payload["aggregate"],
        per_sequence=tuple(payload["per_sequence"]),
        histogram=payload["histogram"],
        curves={
            k: tuple((float(a), float(b)) for a, b in v)
            for k, v in payload["curves"].items()
        },
        baselines=payload["baselines"],
        overhead=payload["overhead"],
    )


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def emit(
    bundle: ReportBundle,
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "json-lines", "csv", "plot-data"),
    figures: bool = True,
) -> list[Path]:
    """Write the bundle under ``out_dir``; returns the files written.

    json -> report.json; json-lines -> report.jsonl (one record per
    sequence); csv -> metrics.csv (per-sequence rows plus an ALL row) and
    attribute_histogram.csv; plot-data -> one (threshold, fraction) CSV
    per curve.  With ``figures`` the success/precision curves and the
    winner histogram are also rendered to PNG.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if "json" in formats:
        path = out / "report.json"
        path.write_text(bundle_to_json(bundle), encoding="utf-8")
        written.append(path)
    if "json-lines" in formats:
        path = out / "report.jsonl"
        lines = [json.dumps(row, sort_keys=True) for row in bundle.per_sequence]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        path = out / "metrics.csv"
        header = ["sequence_id", "auc", "precision", "norm_precision", "ao", "sr50", "sr75", "frames"]
        rows = [
            [
                r["sequence_id"],
                repr(r["auc"]),
                repr(r["precision"]),
                repr(r["norm_precision"]),
                repr(r["ao"]),
                repr(r["sr50"]),
                repr(r["sr75"]),
                r["frames_scored"],
            ]
            for r in bundle.per_sequence
        ]
        agg = bundle.aggregate
        rows.append(
            [
                "ALL",
                repr(agg["auc"]),
                repr(agg["precision"]),
                repr(agg["norm_precision"]),
                repr(agg["ao"]),
                repr(agg["sr50"]),
                repr(agg["sr75"]),
                int(agg["frames_evaluated"]),
            ]
        )
        _write_csv(path, header, rows)
        written.append(path)
        hist_path = out / "attribute_histogram.csv"
        hist_rows = [
            [attr, tracker, count]
            for attr in sorted(bundle.histogram)
            for tracker, count in sorted(bundle.histogram[attr].items())
        ]
        _write_csv(hist_path, ["attribute", "tracker", "count"], hist_rows)
        written.append(hist_path)
    if "plot-data" in formats:
        for name, points in sorted(bundle.curves.items()):
            path = out / f"{name}_curve.csv"
            _write_csv(
                path, ["threshold", "fraction"], [[repr(a), repr(b)] for a, b in points]
            )
            written.append(path)
    if figures:
        written.extend(_render_figures(bundle, out))
    return written


def _render_figures(bundle: ReportBundle, out: Path) -> list[Path]:
    written = []
    curve_specs = [
        ("success", "Overlap threshold", "Success fraction", "success_plot.png"),
        ("precision", "Center error threshold (px)", "Precision", "precision_plot.png"),
        (
            "norm_precision",
            "Normalized center error threshold",
            "Normalized precision",
            "norm_precision_plot.png",
        ),
    ]
    for key, xlabel, ylabel, filename in curve_specs:
        points = bundle.curves.get(key)
        if not points:
            continue
        fig = Figure(figsize=(5.0, 3.5))
        ax = fig.add_subplot(1, 1, 1)
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, lw=2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_ylim(0.0, 1.02)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out / filename
        fig.savefig(path, dpi=110)
        written.append(path)
    if bundle.histogram:
        attrs = sorted(bundle.histogram)
        trackers = sorted({t for counts in bundle.histogram.values() for t in counts})
        fig = Figure(figsize=(max(6.0, 1.2 * len(attrs)), 3.8))
        ax = fig.add_subplot(1, 1, 1)
        width = 0.8 / max(len(trackers), 1)
        for j, tracker in enumerate(trackers):
            xs = [i + j * width for i in range(len(attrs))]
            ys = [bundle.histogram[a].get(tracker, 0) for a in attrs]
            ax.bar(xs, ys, width=width, label=tracker)
        ax.set_xticks([i + 0.4 for i in range(len(attrs))])
        ax.set_xticklabels(attrs, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("Videos where tracker wins")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / "attribute_histogram.png"
        fig.savefig(path, dpi=110)
        written.append(path)
    return written


def write_ablation(
    rows: Sequence[AblationRow], out_dir: str | Path, metric: str, figures: bool = True
) -> list[Path]:
    """Pool-size study outputs: CSV, JSON and an optional line plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "ablation.csv"
    _write_csv(
        path,
        ["pool_size", "video", "frame"],
        [[r.pool_size, repr(r.video), repr(r.frame)] for r in rows],
    )
    written.append(path)
    jpath = out / "ablation.json"
    jpath.write_text(
        json.dumps(
            {
                "metric": metric,
                "rows": [
                    {"pool_size": r.pool_size, "video": r.video, "frame": r.frame}
                    for r in rows
                ],
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    written.append(jpath)
    if figures and rows:
        fig = Figure(figsize=(5.0, 3.5))
        ax = fig.add_subplot(1, 1, 1)
        sizes = [r.pool_size for r in rows]
        ax.plot(sizes, [r.video for r in rows], marker="o", label="video level")
        ax.plot(sizes, [r.frame for r in rows], marker="s", label="frame level")
        ax.set_xlabel("Pool size")
        ax.set_ylabel(metric)
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        ppath = out / "ablation.png"
        fig.savefig(ppath, dpi=110)
        written.append(ppath)
    return written
