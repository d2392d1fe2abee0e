"""Parsing and serialization of annotation files, result files and manifests.

On-disk layout (documented in docs/formats.md):

    <dataset_root>/manifest.txt
    <dataset_root>/sequences/<sequence_id>/groundtruth.txt
    <dataset_root>/sequences/<sequence_id>/attributes.txt
    <results_root>/<tracker_id>/<sequence_id>.txt

Ground-truth and result files are UTF-8 text with one ``x,y,w,h`` line per
frame.  Absent frames are accepted liberally on read (empty line,
``nan,nan,nan,nan`` in any case, or a lone ``0``) and always written back
canonically as ``nan,nan,nan,nan``.

Loading never fails fast on per-file problems: missing files, length
mismatches and bad attribute tags are collected into one
DatasetValidationError naming every offending (tracker, sequence) pair.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .geometry import BBox, MaybeBox

__all__ = [
    "Trajectory",
    "SequenceRecord",
    "ResultSet",
    "Manifest",
    "ManifestSequence",
    "ManifestError",
    "TrajectoryParseError",
    "NegativeSizeError",
    "Issue",
    "DatasetValidationError",
    "DEFAULT_FRAME_COST_S",
    "parse_trajectory",
    "serialize_trajectory",
    "parse_attributes",
    "serialize_attributes",
    "load_manifest",
    "write_manifest",
    "load_sequences",
    "load_results",
    "write_results",
    "write_dataset",
    "result_path",
]

Trajectory = tuple[MaybeBox, ...]

DEFAULT_FRAME_COST_S = 1.0 / 50.0
ABSENT_LINE = "nan,nan,nan,nan"


class TrajectoryParseError(ValueError):
    """Malformed line in a trajectory file."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NegativeSizeError(TrajectoryParseError):
    """Box with negative width or height in a trajectory file."""


class ManifestError(ValueError):
    """Malformed manifest file."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"manifest line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Issue:
    """One collected validation problem."""

    kind: str  # missing-file | length-mismatch | parse-error | unknown-attribute | ...
    detail: str
    tracker: str | None = None
    sequence: str | None = None

    def __str__(self) -> str:
        where = ", ".join(
            f"{k}={v}" for k, v in (("tracker", self.tracker), ("sequence", self.sequence)) if v
        )
        return f"[{self.kind}] {self.detail}" + (f" ({where})" if where else "")


class DatasetValidationError(ValueError):
    """All problems found while loading a dataset tree, reported together."""

    def __init__(self, issues: Sequence[Issue]):
        self.issues = list(issues)
        lines = "\n".join(f"  - {i}" for i in self.issues)
        super().__init__(f"{len(self.issues)} validation issue(s):\n{lines}")


@dataclass(frozen=True)
class SequenceRecord:
    """One annotated video: ground-truth trajectory plus tags and metadata."""

    id: str
    frame_count: int
    gt: Trajectory
    attributes: frozenset[str]
    split: str  # "train" | "test"
    image_size: tuple[float, float] | None = None
    transforms: tuple[str, ...] = ()  # provenance tags of applied augmentations

    def __post_init__(self):
        if not self.id:
            raise ValueError("empty sequence id")
        if self.frame_count < 2:
            raise ValueError(f"sequence {self.id}: needs >= 2 frames")
        if len(self.gt) != self.frame_count:
            raise ValueError(
                f"sequence {self.id}: gt has {len(self.gt)} frames, expected {self.frame_count}"
            )
        if self.split not in ("train", "test"):
            raise ValueError(f"sequence {self.id}: bad split {self.split!r}")


@dataclass(frozen=True)
class ResultSet:
    """Stored outputs of one tracker: sequence id -> trajectory."""

    tracker_id: str
    entries: dict[str, Trajectory] = field(default_factory=dict)


@dataclass(frozen=True)
class ManifestSequence:
    id: str
    split: str
    path: str  # relative to the manifest directory
    image_size: tuple[float, float] | None = None


@dataclass(frozen=True)
class Manifest:
    """Dataset index: sequence list, ordered tracker list, attribute vocabulary.

    The tracker order is the global tie-break order used everywhere.
    ``digest`` is the sha256 of the manifest file bytes, stamped into
    reports so results are never compared across different datasets.
    """

    name: str
    root: Path
    attributes: tuple[str, ...]
    trackers: tuple[str, ...]
    frame_costs: dict[str, float]
    sequences: tuple[ManifestSequence, ...]
    digest: str = ""

    def frame_cost(self, tracker_id: str) -> float:
        return self.frame_costs.get(tracker_id, DEFAULT_FRAME_COST_S)

    def sequence_dir(self, entry: ManifestSequence) -> Path:
        return self.root / entry.path


def _parse_number(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise TrajectoryParseError(line_no, f"bad number {token!r}") from None
    return value


def parse_trajectory(text: str) -> Trajectory:
    """Parse one trajectory file body (one frame per line).

    Raises:
        TrajectoryParseError: malformed numerics or field count.
        NegativeSizeError: negative width or height.
    """
    boxes: list[MaybeBox] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line == "" or line == "0" or line.lower() == ABSENT_LINE:
            boxes.append(None)
            continue
        parts = [p.strip() for p in line.replace("\t", ",").split(",")]
        if len(parts) != 4:
            raise TrajectoryParseError(line_no, f"expected 4 fields, got {len(parts)}")
        values = [_parse_number(p, line_no) for p in parts]
        if all(math.isnan(v) for v in values):
            boxes.append(None)
            continue
        if any(not math.isfinite(v) for v in values):
            raise TrajectoryParseError(line_no, f"non-finite value in {line!r}")
        if values[2] < 0 or values[3] < 0:
            raise NegativeSizeError(line_no, f"negative size in {line!r}")
        boxes.append(BBox(*values))
    return tuple(boxes)


def _fmt(v: float) -> str:
    # repr round-trips floats exactly and prints integral values without
    # an exponent; canonical files regenerate byte-identically.
    return repr(v)


def serialize_trajectory(traj: Sequence[MaybeBox]) -> str:
    """Canonical file body for a trajectory (absent frames as nan,nan,nan,nan)."""
    lines = []
    for box in traj:
        if box is None:
            lines.append(ABSENT_LINE)
        else:
            lines.append(",".join(_fmt(v) for v in (box.x, box.y, box.w, box.h)))
    return "\n".join(lines) + "\n"


def parse_attributes(text: str) -> frozenset[str]:
    """One tag per line; blanks and '#' comments ignored."""
    tags = set()
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            tags.add(line)
    return frozenset(tags)


def serialize_attributes(tags: Iterable[str]) -> str:
    body = "\n".join(sorted(tags))
    return body + "\n" if body else ""


def _parse_size(token: str, line_no: int) -> tuple[float, float]:
    parts = token.lower().split("x")
    if len(parts) != 2:
        raise ManifestError(line_no, f"bad size {token!r}, expected WxH")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise ManifestError(line_no, f"bad size {token!r}") from None


def load_manifest(path: str | Path) -> Manifest:
    """Parse and validate a manifest file.

    Raises:
        ManifestError: structural problems, with the offending line number.
    """
    path = Path(path)
    data = path.read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    name = ""
    attributes: list[str] = []
    trackers: list[str] = []
    frame_costs: dict[str, float] = {}
    sequences: list[ManifestSequence] = []
    seen_seq: set[str] = set()
    section = ""
    for line_no, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in ("attributes", "trackers", "sequences"):
                raise ManifestError(line_no, f"unknown section {section!r}")
            continue
        if not section:
            if line.startswith("dataset:"):
                name = line.split(":", 1)[1].strip()
                continue
            raise ManifestError(line_no, f"unexpected line before sections: {line!r}")
        if section == "attributes":
            attributes.append(line)
        elif section == "trackers":
            parts = line.split()
            if len(parts) not in (1, 2):
                raise ManifestError(line_no, f"bad tracker line {line!r}")
            tracker = parts[0]
            if tracker in trackers:
                raise ManifestError(line_no, f"duplicate tracker {tracker!r}")
            trackers.append(tracker)
            if len(parts) == 2:
                try:
                    frame_costs[tracker] = float(parts[1])
                except ValueError:
                    raise ManifestError(line_no, f"bad frame cost {parts[1]!r}") from None
        elif section == "sequences":
            parts = line.split()
            if len(parts) not in (3, 4):
                raise ManifestError(
                    line_no, f"bad sequence line {line!r}, expected: id split path [WxH]"
                )
            seq_id, split, rel = parts[:3]
            if split not in ("train", "test"):
                raise ManifestError(line_no, f"bad split {split!r}")
            if seq_id in seen_seq:
                raise ManifestError(line_no, f"duplicate sequence {seq_id!r}")
            seen_seq.add(seq_id)
            size = _parse_size(parts[3], line_no) if len(parts) == 4 else None
            sequences.append(ManifestSequence(id=seq_id, split=split, path=rel, image_size=size))
    if not name:
        raise ManifestError(0, "missing 'dataset:' header")
    return Manifest(
        name=name,
        root=path.parent,
        attributes=tuple(attributes),
        trackers=tuple(trackers),
        frame_costs=frame_costs,
        sequences=tuple(sequences),
        digest=digest,
    )


def _fmt_size(size: tuple[float, float]) -> str:
    def one(v: float) -> str:
        return str(int(v)) if v == int(v) else repr(v)

    return f"{one(size[0])}x{one(size[1])}"


def write_manifest(manifest: Manifest, path: str | Path | None = None) -> Manifest:
    """Write a manifest canonically; returns it re-loaded (digest refreshed)."""
    path = Path(path) if path is not None else manifest.root / "manifest.txt"
    lines = [f"dataset: {manifest.name}", "", "[attributes]"]
    lines.extend(manifest.attributes)
    lines.append("")
    lines.append("[trackers]")
    for tracker in manifest.trackers:
        if tracker in manifest.frame_costs:
            lines.append(f"{tracker} {repr(manifest.frame_costs[tracker])}")
        else:
            lines.append(tracker)
    lines.append("")
    lines.append("[sequences]")
    for entry in manifest.sequences:
        line = f"{entry.id} {entry.split} {entry.path}"
        if entry.image_size is not None:
            line += f" {_fmt_size(entry.image_size)}"
        lines.append(line)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return load_manifest(path)


def load_sequences(manifest: Manifest) -> list[SequenceRecord]:
    """Load every sequence record, in manifest order.

    Raises:
        DatasetValidationError: any missing file, parse error, short
            sequence or attribute tag outside the declared vocabulary.
    """
    issues: list[Issue] = []
    records: list[SequenceRecord] = []
    vocab = set(manifest.attributes)
    for entry in manifest.sequences:
        seq_dir = manifest.sequence_dir(entry)
        gt_path = seq_dir / "groundtruth.txt"
        if not gt_path.is_file():
            issues.append(Issue("missing-file", str(gt_path), sequence=entry.id))
            continue
        try:
            gt = parse_trajectory(gt_path.read_text(encoding="utf-8"))
        except TrajectoryParseError as err:
            issues.append(Issue("parse-error", f"{gt_path}: {err}", sequence=entry.id))
            continue
        if len(gt) < 2:
            issues.append(
                Issue("too-short", f"{entry.id} has {len(gt)} frame(s)", sequence=entry.id)
            )
            continue
        attr_path = seq_dir / "attributes.txt"
        attributes = frozenset()
        if attr_path.is_file():
            attributes = parse_attributes(attr_path.read_text(encoding="utf-8"))
            unknown = attributes - vocab
            for tag in sorted(unknown):
                issues.append(
                    Issue("unknown-attribute", f"{tag!r} not in vocabulary", sequence=entry.id)
                )
        records.append(
            SequenceRecord(
                id=entry.id,
                frame_count=len(gt),
                gt=gt,
                attributes=attributes,
                split=entry.split,
                image_size=entry.image_size,
            )
        )
    if issues:
        raise DatasetValidationError(issues)
    return records


def result_path(results_root: str | Path, tracker_id: str, sequence_id: str) -> Path:
    return Path(results_root) / tracker_id / f"{sequence_id}.txt"


def load_results(
    manifest: Manifest,
    results_root: str | Path,
    sequences: Sequence[SequenceRecord] | None = None,
    trackers: Sequence[str] | None = None,
) -> list[ResultSet]:
    """Load tracker outputs for every (tracker, sequence) pair.

    Result sets come back in manifest tracker order (restricted to
    ``trackers`` when given).  Every trajectory is validated against the
    sequence frame count; problems are collected, not raised one by one.
    """
    if sequences is None:
        sequences = load_sequences(manifest)
    if trackers is None:
        trackers = manifest.trackers
    else:
        unknown = [t for t in trackers if t not in manifest.trackers]
        if unknown:
            raise DatasetValidationError(
                [Issue("unknown-tracker", f"{t!r} not in manifest", tracker=t) for t in unknown]
            )
        trackers = tuple(t for t in manifest.trackers if t in set(trackers))
    issues: list[Issue] = []
    result_sets: list[ResultSet] = []
    for tracker in trackers:
        entries: dict[str, Trajectory] = {}
        for seq in sequences:
            path = result_path(results_root, tracker, seq.id)
            if not path.is_file():
                issues.append(Issue("missing-file", str(path), tracker=tracker, sequence=seq.id))
                continue
            try:
                traj = parse_trajectory(path.read_text(encoding="utf-8"))
            except TrajectoryParseError as err:
                issues.append(
                    Issue("parse-error", f"{path}: {err}", tracker=tracker, sequence=seq.id)
                )
                continue
            if len(traj) != seq.frame_count:
                issues.append(
                    Issue(
                        "length-mismatch",
                        f"expected {seq.frame_count} frames, got {len(traj)}",
                        tracker=tracker,
                        sequence=seq.id,
                    )
                )
                continue
            entries[seq.id] = traj
        result_sets.append(ResultSet(tracker_id=tracker, entries=entries))
    if issues:
        raise DatasetValidationError(issues)
    return result_sets


def write_results(
    results_root: str | Path, tracker_id: str, trajectories: dict[str, Trajectory]
) -> None:
    """Write one tracker's trajectories under the standard layout."""
    for seq_id, traj in trajectories.items():
        path = result_path(results_root, tracker_id, seq_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(serialize_trajectory(traj), encoding="utf-8")


def write_dataset(
    name: str,
    records: Sequence[SequenceRecord],
    attributes: Sequence[str],
    out_dir: str | Path,
    trackers: Sequence[str] = (),
    frame_costs: dict[str, float] | None = None,
) -> Manifest:
    """Write sequence records as a fresh dataset tree and return its manifest."""
    out = Path(out_dir)
    entries = []
    for record in records:
        seq_dir = out / "sequences" / record.id
        seq_dir.mkdir(parents=True, exist_ok=True)
        (seq_dir / "groundtruth.txt").write_text(
            serialize_trajectory(record.gt), encoding="utf-8"
        )
        (seq_dir / "attributes.txt").write_text(
            serialize_attributes(record.attributes), encoding="utf-8"
        )
        entries.append(
            ManifestSequence(
                id=record.id,
                split=record.split,
                path=f"sequences/{record.id}",
                image_size=record.image_size,
            )
        )
    manifest = Manifest(
        name=name,
        root=out,
        attributes=tuple(attributes),
        trackers=tuple(trackers),
        frame_costs=dict(frame_costs or {}),
        sequences=tuple(entries),
    )
    return write_manifest(manifest, out / "manifest.txt")
