"""Recording data model, file ingestion, splitting and augmentation.

A recording on disk is three sibling files sharing a stem:

* ``<stem>.csv`` -- the signal, header ``t,ax,ay,az``, t in seconds
  (monotonic, uniform), accelerations in m/s^2, period decimals.
* ``<stem>.annotations.csv`` -- ``start_index,end_index,label`` rows
  with label in {M1..M4, R1..R19}.
* ``<stem>.meta`` -- ``key=value`` lines: subject_id, group
  (healthy|patient), session, hand (dominant|nondominant|both),
  scenario (L1|L2), fs_hz.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .kinematics import ACCELERATION, Epoch, TimeSeries3D, resample

KEY_MOVEMENTS = ("M1", "M2", "M3", "M4")
DISTRACTORS = tuple(f"R{k}" for k in range(1, 20))
ALL_LABELS = KEY_MOVEMENTS + DISTRACTORS

GROUPS = ("healthy", "patient")
HANDS = ("dominant", "nondominant", "both")
SCENARIOS = ("L1", "L2")

_META_KEYS = ("subject_id", "group", "session", "hand", "scenario", "fs_hz")


def is_key_movement(label: str) -> bool:
    return label in KEY_MOVEMENTS


def label_index(label: str) -> int:
    """Class index 0..3 of a key movement label."""
    try:
        return KEY_MOVEMENTS.index(label)
    except ValueError:
        raise ContractError(f"not a key movement label: {label!r}") from None


@dataclass(frozen=True)
class Annotation:
    """Half-open sample range [start, end) carrying a movement label."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if self.label not in ALL_LABELS:
            raise ContractError(f"unknown movement label {self.label!r}")
        if not (0 <= self.start < self.end):
            raise ContractError(
                f"annotation range must satisfy 0 <= start < end, "
                f"got [{self.start}, {self.end})"
            )


@dataclass(frozen=True)
class Recording:
    """One wrist recording of one subject session, with labelled segments."""

    subject_id: str
    group: str
    session: int
    hand: str
    scenario: str
    series: TimeSeries3D
    annotations: tuple[Annotation, ...] = ()

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ContractError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.hand not in HANDS:
            raise ContractError(f"hand must be one of {HANDS}, got {self.hand!r}")
        if self.scenario not in SCENARIOS:
            raise ContractError(f"scenario must be one of {SCENARIOS}")
        if self.session < 1:
            raise ContractError(f"session must be >= 1, got {self.session}")
        if self.group == "healthy" and self.session != 1:
            raise ContractError("healthy subjects are recorded in session 1 only")
        anns = tuple(sorted(self.annotations, key=lambda a: a.start))
        n = len(self.series)
        prev_end = 0
        for a in anns:
            if a.end > n:
                raise ContractError(
                    f"annotation [{a.start}, {a.end}) exceeds series length {n}"
                )
            if a.start < prev_end:
                raise ContractError(
                    f"annotations overlap at sample {a.start} ({a.label})"
                )
            prev_end = a.end
        object.__setattr__(self, "annotations", anns)

    def segment(self, annotation: Annotation) -> TimeSeries3D:
        """The raw series slice covered by one annotation."""
        return self.series.slice(annotation.start, annotation.end)


@dataclass(frozen=True)
class LabeledEpoch:
    """Classifier input unit: a fixed-length epoch plus its movement label."""

    epoch: Epoch
    label: str

    def __post_init__(self):
        if self.label not in ALL_LABELS:
            raise ContractError(f"unknown movement label {self.label!r}")


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ContractError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _sidecar_paths(path):
    path = Path(path)
    stem = path.with_suffix("")
    return path, stem.with_suffix(".annotations.csv"), stem.with_suffix(".meta")


def _parse_float(text, path, line, fieldname):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"not a number: {text!r}", path=path, line=line, field=fieldname
        ) from None
    if not np.isfinite(value):
        raise ParseError(
            f"non-finite value: {text!r}", path=path, line=line, field=fieldname
        )
    return value


def _parse_int(text, path, line, fieldname):
    try:
        return int(text)
    except ValueError:
        raise ParseError(
            f"not an integer: {text!r}", path=path, line=line, field=fieldname
        ) from None


def _read_signal(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty signal file", path=path, line=1) from None
        if header != ["t", "ax", "ay", "az"]:
            raise ParseError(
                f"expected header t,ax,ay,az, got {','.join(header)}",
                path=path,
                line=1,
                field="header",
            )
        times, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ParseError(
                    f"expected 4 columns, got {len(row)}", path=path, line=line_no
                )
            times.append(_parse_float(row[0], path, line_no, "t"))
            rows.append(
                [
                    _parse_float(row[1], path, line_no, "ax"),
                    _parse_float(row[2], path, line_no, "ay"),
                    _parse_float(row[3], path, line_no, "az"),
                ]
            )
    if len(rows) < 2:
        raise ParseError("signal needs at least 2 rows", path=path, line=2)
    return np.asarray(times), np.asarray(rows)


def _read_annotations(path):
    anns = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty annotation file", path=path, line=1) from None
        if header != ["start_index", "end_index", "label"]:
            raise ParseError(
                f"expected header start_index,end_index,label, got {','.join(header)}",
                path=path,
                line=1,
                field="header",
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError(
                    f"expected 3 columns, got {len(row)}", path=path, line=line_no
                )
            start = _parse_int(row[0], path, line_no, "start_index")
            end = _parse_int(row[1], path, line_no, "end_index")
            if row[2] not in ALL_LABELS:
                raise ParseError(
                    f"unknown label {row[2]!r}", path=path, line=line_no, field="label"
                )
            if not (0 <= start < end):
                raise ParseError(
                    f"bad range [{start}, {end})",
                    path=path,
                    line=line_no,
                    field="start_index",
                )
            anns.append((line_no, Annotation(start, end, row[2])))
    return anns


def _read_metadata(path):
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", path=path, line=line_no)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _META_KEYS:
                raise ParseError(
                    f"unknown metadata key {key!r}", path=path, line=line_no, field=key
                )
            if key in meta:
                raise ParseError(
                    f"duplicate metadata key {key!r}", path=path, line=line_no, field=key
                )
            meta[key] = (line_no, value)
    for key in _META_KEYS:
        if key not in meta:
            raise ParseError(f"missing metadata key {key!r}", path=path, field=key)
    return meta


def parse_recording(path) -> Recording:
    """Load and validate a recording from its signal file path.

    Annotation and metadata sidecars are located next to the signal
    file.  Any structural defect raises :class:`ParseError` naming the
    file, line and field.
    """
    sig_path, ann_path, meta_path = _sidecar_paths(path)
    times, samples = _read_signal(sig_path)
    meta = _read_metadata(meta_path)

    fs = _parse_float(meta["fs_hz"][1], meta_path, meta["fs_hz"][0], "fs_hz")
    if fs <= 0:
        raise ParseError("fs_hz must be positive", path=meta_path, field="fs_hz")
    session = _parse_int(meta["session"][1], meta_path, meta["session"][0], "session")
    group = meta["group"][1]
    if group not in GROUPS:
        raise ParseError(
            f"group must be healthy or patient, got {group!r}",
            path=meta_path,
            line=meta["group"][0],
            field="group",
        )
    hand = meta["hand"][1]
    if hand not in HANDS:
        raise ParseError(
            f"hand must be one of {'|'.join(HANDS)}",
            path=meta_path,
            line=meta["hand"][0],
            field="hand",
        )
    scenario = meta["scenario"][1]
    if scenario not in SCENARIOS:
        raise ParseError(
            "scenario must be L1 or L2",
            path=meta_path,
            line=meta["scenario"][0],
            field="scenario",
        )

    dt = np.diff(times)
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0))
        raise ParseError(
            "time column must be strictly increasing",
            path=sig_path,
            line=bad + 3,  # header + 1-based + offending row
            field="t",
        )
    if np.any(np.abs(dt - 1.0 / fs) > 1e-6 / fs):
        bad = int(np.argmax(np.abs(dt - 1.0 / fs) > 1e-6 / fs))
        raise ParseError(
            f"time column is not uniform at 1/fs_hz = {1.0 / fs}",
            path=sig_path,
            line=bad + 3,
            field="t",
        )

    n = len(samples)
    annotations = []
    for line_no, ann in _read_annotations(ann_path):
        if ann.end > n:
            raise ParseError(
                f"annotation end {ann.end} exceeds series length {n}",
                path=ann_path,
                line=line_no,
                field="end_index",
            )
        annotations.append((line_no, ann))
    annotations.sort(key=lambda pair: pair[1].start)
    prev_end, prev_line = 0, None
    for line_no, ann in annotations:
        if ann.start < prev_end:
            raise ParseError(
                f"annotation overlaps the one on line {prev_line}",
                path=ann_path,
                line=line_no,
                field="start_index",
            )
        prev_end, prev_line = ann.end, line_no

    series = TimeSeries3D(fs=fs, samples=samples, order=ACCELERATION)
    return Recording(
        subject_id=meta["subject_id"][1],
        group=group,
        session=session,
        hand=hand,
        scenario=scenario,
        series=series,
        annotations=tuple(ann for _, ann in annotations),
    )


def write_recording(rec: Recording, path) -> None:
    """Write a recording's three files; inverse of :func:`parse_recording`.

    Floats are written with ``repr`` (shortest round-trip form), so
    write(parse(f)) is byte-identical for files this writer produced.
    """
    sig_path, ann_path, meta_path = _sidecar_paths(path)
    sig_path.parent.mkdir(parents=True, exist_ok=True)

    buf = io.StringIO()
    buf.write("t,ax,ay,az\n")
    fs = rec.series.fs
    for i, (x, y, z) in enumerate(rec.series.samples):
        buf.write(f"{i / fs!r},{float(x)!r},{float(y)!r},{float(z)!r}\n")
    sig_path.write_text(buf.getvalue(), encoding="utf-8")

    lines = ["start_index,end_index,label"]
    lines += [f"{a.start},{a.end},{a.label}" for a in rec.annotations]
    ann_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta_path.write_text(
        f"subject_id={rec.subject_id}\n"
        f"group={rec.group}\n"
        f"session={rec.session}\n"
        f"hand={rec.hand}\n"
        f"scenario={rec.scenario}\n"
        f"fs_hz={fs!r}\n",
        encoding="utf-8",
    )


def load_dataset_dir(directory) -> list[Recording]:
    """Parse every ``*.csv`` signal file in a directory (sorted by name)."""
    directory = Path(directory)
    recs = []
    for sig in sorted(directory.glob("*.csv")):
        if sig.name.endswith(".annotations.csv"):
            continue
        recs.append(parse_recording(sig))
    return recs


# ---------------------------------------------------------------------------
# Epoch extraction, splitting, augmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtractResult:
    """Epochs pulled from a recording plus the count of skipped segments."""

    epochs: tuple[LabeledEpoch, ...]
    skipped: int = 0


def extract_epochs(rec: Recording, w: int) -> ExtractResult:
    """One fixed-length epoch per key-movement annotation.

    Each M1..M4 segment is resampled to length ``w``; distractor
    annotations are ignored, and segments shorter than 2 samples are
    skipped (counted in the result).
    """
    if w < 2:
        raise ContractError(f"epoch length must be >= 2, got {w}")
    epochs, skipped = [], 0
    for ann in rec.annotations:
        if not is_key_movement(ann.label):
            continue
        if ann.end - ann.start < 2:
            skipped += 1
            continue
        seg = resample(rec.segment(ann), w)
        epochs.append(
            LabeledEpoch(
                epoch=Epoch(
                    values=seg.samples, source_id=rec.subject_id, offset=ann.start
                ),
                label=ann.label,
            )
        )
    return ExtractResult(epochs=tuple(epochs), skipped=skipped)


def _round_half_up(value):
    return int(np.floor(value + 0.5))


def split_train_test(epochs, cfg: SplitConfig):
    """Disjoint, exhaustive train/test partition, deterministic in the seed.

    Stratified (the default) shuffles within each movement class and
    takes round(n_class * train_fraction) training epochs per class;
    rounding is half-up.
    """
    epochs = list(epochs)
    rng = np.random.default_rng(cfg.seed)
    if not cfg.stratified:
        order = rng.permutation(len(epochs))
        cut = _round_half_up(len(epochs) * cfg.train_fraction)
        train = [epochs[i] for i in order[:cut]]
        test = [epochs[i] for i in order[cut:]]
        return train, test

    by_class = {label: [] for label in KEY_MOVEMENTS}
    for i, ep in enumerate(epochs):
        if ep.label not in by_class:
            raise ContractError(
                f"stratified split expects key-movement labels, got {ep.label!r}"
            )
        by_class[ep.label].append(i)
    empty = [label for label, idx in by_class.items() if not idx]
    if empty:
        raise ContractError(f"stratified split with empty class(es): {empty}")

    train, test = [], []
    for label in KEY_MOVEMENTS:
        idx = np.asarray(by_class[label])
        order = rng.permutation(len(idx))
        cut = _round_half_up(len(idx) * cfg.train_fraction)
        train += [epochs[i] for i in idx[order[:cut]]]
        test += [epochs[i] for i in idx[order[cut:]]]
    return train, test


def shift_epoch(labeled: LabeledEpoch, offset: int) -> LabeledEpoch:
    """Circularly shift an epoch along time by ``offset`` samples."""
    shifted = np.roll(labeled.epoch.values, offset, axis=0)
    return replace(labeled, epoch=replace(labeled.epoch, values=shifted))


def augment_shift(labeled: LabeledEpoch, max_frac: float, rng) -> LabeledEpoch:
    """Random circular time shift of up to ``max_frac`` of the epoch length.

    The offset is drawn uniformly from [-max_frac*W, +max_frac*W]
    (integers, inclusive); label and length are untouched and the
    caller's generator advances deterministically.
    """
    if not (0.0 <= max_frac <= 0.5):
        raise ContractError(f"max_frac must be in [0, 0.5], got {max_frac}")
    span = int(max_frac * len(labeled.epoch))
    offset = int(rng.integers(-span, span + 1))
    return shift_epoch(labeled, offset)
