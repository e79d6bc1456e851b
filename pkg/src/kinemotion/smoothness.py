"""Jerk-based smoothness statistics, cohort contrast and session evolution.

All published reference tables report a single axis (x), so comparisons
and improvement flags are computed for one named axis at a time; the
underlying records always carry all three axes.

Reference-table fixture format (also accepted from user files): CSV
with header ``movement,statistic,cohort_or_session,value`` where
statistic is mean|max|min and the third column is either a cohort name
(healthy|patient) or a session number (1..4).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import KEY_MOVEMENTS
from .errors import ContractError, DegenerateInputError, ParseError
from .kinematics import (
    AxisStats,
    TimeSeries3D,
    differentiate,
    segment_stats,
    squared_jerk,
)

STATISTICS = ("mean", "max", "min")
COHORTS = ("healthy", "patient")

HEALTHY_HIGHER = "healthy_higher"
PATIENT_HIGHER = "patient_higher"
EQUAL = "equal"


def movement_smoothness(segment: TimeSeries3D):
    """Jerk and squared-jerk statistics of one segmented movement.

    Returns ``(jerk_stats, squared_jerk_stats)`` as per-axis
    mean/max/min triples.
    """
    if len(segment) < 3:
        raise DegenerateInputError(
            f"segment too short for jerk computation: {len(segment)} samples"
        )
    jerk = differentiate(segment)
    return segment_stats(jerk), segment_stats(squared_jerk(jerk))


@dataclass(frozen=True)
class SmoothnessRecord:
    """Jerk statistics of one segmented movement of one subject session."""

    subject_id: str
    group: str
    session: int
    movement: str
    jerk_stats: AxisStats
    squared_jerk_stats: AxisStats

    def __post_init__(self):
        if np.any(self.squared_jerk_stats.minimum < 0):
            raise ContractError("squared-jerk statistics cannot be negative")


def record_for_segment(recording, annotation) -> SmoothnessRecord:
    """Compute a SmoothnessRecord for one annotated segment of a recording."""
    jerk_stats, sq_stats = movement_smoothness(recording.segment(annotation))
    return SmoothnessRecord(
        subject_id=recording.subject_id,
        group=recording.group,
        session=recording.session,
        movement=annotation.label,
        jerk_stats=jerk_stats,
        squared_jerk_stats=sq_stats,
    )


def aggregate_stats(stats_list) -> AxisStats:
    """Combine per-segment statistics: mean of means, max of maxes, min of mins."""
    stats_list = list(stats_list)
    if not stats_list:
        raise DegenerateInputError("nothing to aggregate")
    return AxisStats(
        mean=np.mean([s.mean for s in stats_list], axis=0),
        maximum=np.max([s.maximum for s in stats_list], axis=0),
        minimum=np.min([s.minimum for s in stats_list], axis=0),
    )


def aggregate_by_movement(stats_by_record) -> dict[str, AxisStats]:
    """Aggregate an iterable of (movement, AxisStats) pairs per movement."""
    grouped: dict[str, list] = {}
    for movement, stats in stats_by_record:
        grouped.setdefault(movement, []).append(stats)
    return {m: aggregate_stats(sl) for m, sl in grouped.items()}


# ---------------------------------------------------------------------------
# Scalar tables (one axis) and the fixture format
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CohortTable:
    """movement -> statistic -> cohort -> value, for a single axis."""

    values: dict

    def cell(self, movement, statistic, cohort):
        return self.values[movement][statistic][cohort]

    def movements(self):
        return tuple(self.values)


@dataclass(frozen=True)
class SessionTable:
    """movement -> statistic -> session -> value, for a single axis."""

    values: dict

    def cell(self, movement, statistic, session):
        return self.values[movement][statistic][session]

    def movements(self):
        return tuple(self.values)

    def sessions(self):
        found = set()
        for stats in self.values.values():
            for per_session in stats.values():
                found.update(per_session)
        return tuple(sorted(found))


def load_table(path) -> CohortTable | SessionTable:
    """Load a fixture CSV, inferring cohort vs session layout."""
    path = Path(path)
    values: dict = {}
    kinds = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty table file", path=path, line=1) from None
        if header != ["movement", "statistic", "cohort_or_session", "value"]:
            raise ParseError(
                "expected header movement,statistic,cohort_or_session,value",
                path=path,
                line=1,
                field="header",
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ParseError(
                    f"expected 4 columns, got {len(row)}", path=path, line=line_no
                )
            movement, statistic, key, value = row
            if movement not in KEY_MOVEMENTS:
                raise ParseError(
                    f"unknown movement {movement!r}",
                    path=path,
                    line=line_no,
                    field="movement",
                )
            if statistic not in STATISTICS:
                raise ParseError(
                    f"unknown statistic {statistic!r}",
                    path=path,
                    line=line_no,
                    field="statistic",
                )
            if key in COHORTS:
                kinds.add("cohort")
            elif key.isdigit():
                kinds.add("session")
                key = int(key)
            else:
                raise ParseError(
                    f"expected a cohort or session number, got {key!r}",
                    path=path,
                    line=line_no,
                    field="cohort_or_session",
                )
            try:
                number = float(value)
            except ValueError:
                raise ParseError(
                    f"not a number: {value!r}", path=path, line=line_no, field="value"
                ) from None
            values.setdefault(movement, {}).setdefault(statistic, {})[key] = number
    if kinds == {"cohort"}:
        return CohortTable(values)
    if kinds == {"session"}:
        return SessionTable(values)
    raise ParseError(
        "table mixes cohort and session rows (or is empty)", path=path
    )


def cohort_table_from_stats(stats_by_movement, axis="x") -> dict:
    """Project {movement: AxisStats} to one cohort column of scalar cells."""
    table = {}
    for movement, stats in stats_by_movement.items():
        mean, maximum, minimum = stats.along(axis)
        table[movement] = {"mean": mean, "max": maximum, "min": minimum}
    return table


# ---------------------------------------------------------------------------
# Cohort comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonCell:
    healthy: float
    patient: float
    ratio: float  # |patient| / |healthy|
    direction: str

    def __post_init__(self):
        if self.ratio < 0:
            raise ContractError("ratio cannot be negative")


@dataclass(frozen=True)
class CohortComparison:
    """Healthy-vs-patient contrast per movement and statistic, one axis."""

    axis: str
    cells: dict  # (movement, statistic) -> ComparisonCell

    def cell(self, movement, statistic) -> ComparisonCell:
        return self.cells[(movement, statistic)]

    def ratio(self, movement, statistic) -> float:
        return self.cell(movement, statistic).ratio

    def direction(self, movement, statistic) -> str:
        return self.cell(movement, statistic).direction


def _compare_cell(healthy, patient):
    if abs(healthy) > 0:
        ratio = abs(patient) / abs(healthy)
    else:
        ratio = 1.0 if patient == 0 else float("inf")
    if healthy > patient:
        direction = HEALTHY_HIGHER
    elif patient > healthy:
        direction = PATIENT_HIGHER
    else:
        direction = EQUAL
    return ComparisonCell(
        healthy=float(healthy), patient=float(patient), ratio=ratio, direction=direction
    )


def compare_tables(healthy: dict, patient: dict, axis="x") -> CohortComparison:
    """Compare two scalar cohort columns ({movement: {stat: value}})."""
    cells = {}
    for movement in KEY_MOVEMENTS:
        if movement not in healthy or movement not in patient:
            raise ContractError(f"movement {movement} missing from a cohort")
        for statistic in STATISTICS:
            cells[(movement, statistic)] = _compare_cell(
                healthy[movement][statistic], patient[movement][statistic]
            )
    return CohortComparison(axis=axis, cells=cells)


def cohort_compare(healthy, patient, axis="x") -> CohortComparison:
    """Healthy-vs-patient contrast from aggregated {movement: AxisStats}."""
    return compare_tables(
        cohort_table_from_stats(healthy, axis),
        cohort_table_from_stats(patient, axis),
        axis=axis,
    )


def compare_cohort_table(table: CohortTable, axis="x") -> CohortComparison:
    """Contrast straight from a loaded cohort reference table."""
    healthy, patient = {}, {}
    for movement, stats in table.values.items():
        healthy[movement] = {s: stats[s]["healthy"] for s in STATISTICS}
        patient[movement] = {s: stats[s]["patient"] for s in STATISTICS}
    return compare_tables(healthy, patient, axis=axis)


# ---------------------------------------------------------------------------
# Session evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MovementEvolution:
    baseline: float  # session-1 mean squared jerk on the chosen axis
    session_means: dict  # session -> mean
    improved_sessions: frozenset  # sessions strictly below baseline


@dataclass(frozen=True)
class ImprovementFlags:
    """Per-movement sessions that strictly undercut the session-1 mean."""

    axis: str
    movements: dict  # movement -> MovementEvolution

    def improved(self, movement) -> frozenset:
        return self.movements[movement].improved_sessions

    def movements_with_improvement(self):
        return tuple(
            m for m, ev in self.movements.items() if ev.improved_sessions
        )


def evolution_from_means(means_by_movement: dict, axis="x") -> ImprovementFlags:
    """Flags from {movement: {session: mean squared jerk}}.

    Session 1 is the baseline and must be present for every movement;
    a later session is improved iff its mean is strictly lower.
    """
    movements = {}
    for movement, means in means_by_movement.items():
        if 1 not in means:
            raise ContractError(f"movement {movement}: session 1 baseline is missing")
        baseline = means[1]
        improved = frozenset(
            s for s, value in means.items() if s > 1 and value < baseline
        )
        movements[movement] = MovementEvolution(
            baseline=float(baseline),
            session_means={s: float(v) for s, v in sorted(means.items())},
            improved_sessions=improved,
        )
    return ImprovementFlags(axis=axis, movements=movements)


def session_evolution(records, axis="x") -> ImprovementFlags:
    """Flags for one patient's records across sessions.

    Multiple segments of the same movement and session are aggregated
    by the mean of their per-segment squared-jerk means.
    """
    records = list(records)
    if not records:
        raise DegenerateInputError("no records given")
    subjects = {r.subject_id for r in records}
    if len(subjects) > 1:
        raise ContractError(f"records span several subjects: {sorted(subjects)}")
    pooled: dict = {}
    for rec in records:
        mean, _, _ = rec.squared_jerk_stats.along(axis)
        pooled.setdefault(rec.movement, {}).setdefault(rec.session, []).append(mean)
    means = {
        movement: {s: float(np.mean(v)) for s, v in sessions.items()}
        for movement, sessions in pooled.items()
    }
    return evolution_from_means(means, axis=axis)


def evolution_from_table(table: SessionTable, axis="x") -> ImprovementFlags:
    """Flags recomputed from a loaded session reference table (mean rows)."""
    means = {m: dict(stats["mean"]) for m, stats in table.values.items()}
    return evolution_from_means(means, axis=axis)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    """Period decimals, six significant digits."""
    return f"{value:.6g}"


def render_report(obj, fmt="csv") -> str:
    """Render a comparison, flags object or reference table.

    CSV column order follows the published layout: statistics grouped
    mean/max/min, each split healthy/patient or by session.
    """
    if fmt not in ("csv", "json"):
        raise ContractError(f"unknown report format {fmt!r}")
    if isinstance(obj, CohortTable):
        return _render_cohort_table(obj, fmt)
    if isinstance(obj, SessionTable):
        return _render_session_table(obj, fmt)
    if isinstance(obj, CohortComparison):
        return _render_comparison(obj, fmt)
    if isinstance(obj, ImprovementFlags):
        return _render_flags(obj, fmt)
    raise ContractError(f"cannot render object of type {type(obj).__name__}")


def _render_cohort_table(table: CohortTable, fmt):
    if fmt == "json":
        return json.dumps(
            {
                m: {s: dict(stats[s]) for s in STATISTICS}
                for m, stats in table.values.items()
            },
            indent=2,
            sort_keys=True,
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["movement"]
    for statistic in STATISTICS:
        header += [f"{statistic}_{cohort}" for cohort in COHORTS]
    writer.writerow(header)
    for movement in sorted(table.values):
        row = [movement]
        for statistic in STATISTICS:
            row += [_fmt(table.cell(movement, statistic, c)) for c in COHORTS]
        writer.writerow(row)
    return buf.getvalue()


def _render_session_table(table: SessionTable, fmt):
    sessions = table.sessions()
    if fmt == "json":
        return json.dumps(
            {
                m: {s: {str(k): v for k, v in stats[s].items()} for s in STATISTICS}
                for m, stats in table.values.items()
            },
            indent=2,
            sort_keys=True,
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["movement"]
    for statistic in STATISTICS:
        header += [f"{statistic}_session{s}" for s in sessions]
    writer.writerow(header)
    for movement in sorted(table.values):
        row = [movement]
        for statistic in STATISTICS:
            row += [_fmt(table.cell(movement, statistic, s)) for s in sessions]
        writer.writerow(row)
    return buf.getvalue()


def _render_comparison(comparison: CohortComparison, fmt):
    if fmt == "json":
        payload = {
            "axis": comparison.axis,
            "cells": [
                {
                    "movement": movement,
                    "statistic": statistic,
                    "healthy": cell.healthy,
                    "patient": cell.patient,
                    "ratio": cell.ratio,
                    "direction": cell.direction,
                }
                for (movement, statistic), cell in sorted(comparison.cells.items())
            ],
        }
        return json.dumps(payload, indent=2)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["movement", "statistic", "healthy", "patient", "ratio", "direction"])
    for (movement, statistic), cell in sorted(comparison.cells.items()):
        writer.writerow(
            [
                movement,
                statistic,
                _fmt(cell.healthy),
                _fmt(cell.patient),
                _fmt(cell.ratio),
                cell.direction,
            ]
        )
    return buf.getvalue()


def _render_flags(flags: ImprovementFlags, fmt):
    if fmt == "json":
        payload = {
            "axis": flags.axis,
            "movements": {
                movement: {
                    "baseline": ev.baseline,
                    "session_means": {str(s): v for s, v in ev.session_means.items()},
                    "improved_sessions": sorted(ev.improved_sessions),
                }
                for movement, ev in sorted(flags.movements.items())
            },
        }
        return json.dumps(payload, indent=2)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["movement", "baseline", "improved_sessions"])
    for movement, ev in sorted(flags.movements.items()):
        writer.writerow(
            [movement, _fmt(ev.baseline), ";".join(str(s) for s in sorted(ev.improved_sessions))]
        )
    return buf.getvalue()
