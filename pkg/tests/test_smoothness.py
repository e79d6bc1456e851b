"""Smoothness statistics, cohort contrast, session evolution, reports."""

import csv
import io
import json

import numpy as np
import pytest

from kinemotion import bundled_table
from kinemotion.errors import ContractError, DegenerateInputError
from kinemotion.kinematics import AxisStats, TimeSeries3D, differentiate, segment_stats, squared_jerk
from kinemotion.smoothness import (
    EQUAL,
    HEALTHY_HIGHER,
    PATIENT_HIGHER,
    CohortTable,
    SessionTable,
    SmoothnessRecord,
    aggregate_stats,
    cohort_compare,
    compare_cohort_table,
    compare_tables,
    evolution_from_means,
    evolution_from_table,
    load_table,
    movement_smoothness,
    render_report,
    session_evolution,
)


def stats_triple(mean, maximum, minimum):
    return AxisStats(mean=[mean] * 3, maximum=[maximum] * 3, minimum=[minimum] * 3)


class TestMovementSmoothness:
    def test_constant_acceleration_gives_zero_everything(self):
        seg = TimeSeries3D(fs=50.0, samples=np.full((40, 3), 2.5))
        jerk_stats, sq_stats = movement_smoothness(seg)
        assert np.all(jerk_stats.mean == 0) and np.all(sq_stats.mean == 0)
        assert np.all(jerk_stats.maximum == 0) and np.all(sq_stats.maximum == 0)

    def test_linear_ramp_jerk_is_one(self):
        samples = np.zeros((10, 3))
        samples[:, 0] = np.arange(10.0)
        seg = TimeSeries3D(fs=1.0, samples=samples)
        jerk_stats, _ = movement_smoothness(seg)
        mean, maximum, minimum = jerk_stats.along("x")
        assert mean == maximum == minimum == 1.0

    def test_composition_matches_manual_pipeline(self):
        rng = np.random.default_rng(1)
        seg = TimeSeries3D(fs=50.0, samples=rng.normal(size=(64, 3)))
        jerk_stats, sq_stats = movement_smoothness(seg)
        jerk = differentiate(seg)
        np.testing.assert_array_equal(jerk_stats.mean, segment_stats(jerk).mean)
        manual_sq = segment_stats(squared_jerk(jerk))
        np.testing.assert_array_equal(sq_stats.mean, manual_sq.mean)
        np.testing.assert_array_equal(sq_stats.maximum, manual_sq.maximum)

    def test_too_short_segment_rejected(self):
        seg = TimeSeries3D(fs=50.0, samples=np.zeros((2, 3)))
        with pytest.raises(DegenerateInputError):
            movement_smoothness(seg)


class TestAggregation:
    def test_mean_of_means_max_of_maxes_min_of_mins(self):
        stats = [stats_triple(1.0, 10.0, -5.0), stats_triple(3.0, 4.0, -9.0)]
        agg = aggregate_stats(stats)
        assert agg.mean[0] == 2.0
        assert agg.maximum[0] == 10.0
        assert agg.minimum[0] == -9.0


class TestCohortCompare:
    def test_identical_cohorts_are_equal_with_unit_ratio(self):
        cohort = {
            m: stats_triple(1.5, 9.0, -3.0) for m in ("M1", "M2", "M3", "M4")
        }
        comparison = cohort_compare(cohort, cohort)
        for (movement, statistic), cell in comparison.cells.items():
            assert cell.direction == EQUAL
            assert cell.ratio == 1.0

    def test_direction_antisymmetry(self):
        rng = np.random.default_rng(2)
        healthy = {
            m: {"mean": rng.normal(), "max": rng.uniform(1, 5), "min": -rng.uniform(1, 5)}
            for m in ("M1", "M2", "M3", "M4")
        }
        patient = {
            m: {"mean": rng.normal(), "max": rng.uniform(1, 5), "min": -rng.uniform(1, 5)}
            for m in ("M1", "M2", "M3", "M4")
        }
        forward = compare_tables(healthy, patient)
        backward = compare_tables(patient, healthy)
        swap = {HEALTHY_HIGHER: PATIENT_HIGHER, PATIENT_HIGHER: HEALTHY_HIGHER, EQUAL: EQUAL}
        for key, cell in forward.cells.items():
            assert backward.cells[key].direction == swap[cell.direction]

    def test_missing_movement_is_named(self):
        cohort = {m: stats_triple(1, 2, 0) for m in ("M1", "M2", "M3")}
        with pytest.raises(ContractError, match="M4"):
            cohort_compare(cohort, cohort)

    def test_reference_jerk_table_contrast(self):
        # published cohort result: patients' M3 mean-jerk magnitude is
        # about 0.7x the healthy one, and the healthy max is higher for
        # every movement
        table = load_table(bundled_table("cohort_jerk"))
        comparison = compare_cohort_table(table)
        assert comparison.ratio("M3", "mean") == pytest.approx(0.708, abs=0.005)
        for movement in ("M1", "M2", "M3", "M4"):
            assert comparison.direction(movement, "max") == HEALTHY_HIGHER

    def test_reference_squared_jerk_means_all_healthy_higher(self):
        table = load_table(bundled_table("cohort_squared_jerk"))
        comparison = compare_cohort_table(table)
        for movement in ("M1", "M2", "M3", "M4"):
            assert comparison.direction(movement, "mean") == HEALTHY_HIGHER


class TestSessionEvolution:
    def test_patient_102_m4_improves_in_all_later_sessions(self):
        means = {"M4": {1: 1.90, 2: 1.25, 3: 1.67, 4: 0.84}}
        flags = evolution_from_means(means)
        assert flags.improved("M4") == frozenset({2, 3, 4})

    def test_patient_100_m2_never_improves(self):
        means = {"M2": {1: 4.17, 2: 9.07, 3: 12.74, 4: 19.92}}
        flags = evolution_from_means(means)
        assert flags.improved("M2") == frozenset()

    def test_patient_101_m1_improves_throughout(self):
        means = {"M1": {1: 7.61, 2: 2.62, 3: 4.63, 4: 5.23}}
        flags = evolution_from_means(means)
        assert flags.improved("M1") == frozenset({2, 3, 4})

    def test_all_sessions_equal_means_no_improvement(self):
        flags = evolution_from_means({"M1": {1: 2.0, 2: 2.0, 3: 2.0, 4: 2.0}})
        assert flags.improved("M1") == frozenset()

    def test_missing_baseline_rejected(self):
        with pytest.raises(ContractError, match="session 1"):
            evolution_from_means({"M1": {2: 1.0, 3: 2.0}})

    def test_missing_later_session_simply_absent(self):
        flags = evolution_from_means({"M1": {1: 5.0, 3: 1.0}})
        assert flags.improved("M1") == frozenset({3})

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            means = {
                "M2": {s: float(rng.uniform(0.1, 10)) for s in (1, 2, 3, 4)}
            }
            base = evolution_from_means(means)
            factor = float(rng.uniform(0.01, 100))
            scaled = evolution_from_means(
                {"M2": {s: v * factor for s, v in means["M2"].items()}}
            )
            assert base.improved("M2") == scaled.improved("M2")

    def test_records_pathway_aggregates_segment_means(self):
        def record(session, mean):
            return SmoothnessRecord(
                subject_id="P9",
                group="patient",
                session=session,
                movement="M1",
                jerk_stats=stats_triple(0.0, 1.0, -1.0),
                squared_jerk_stats=stats_triple(mean, mean * 10, 0.0),
            )

        records = [record(1, 4.0), record(1, 6.0), record(2, 2.0), record(3, 9.0)]
        flags = session_evolution(records)
        assert flags.movements["M1"].baseline == 5.0  # mean of 4 and 6
        assert flags.improved("M1") == frozenset({2})

    def test_mixed_subjects_rejected(self):
        a = SmoothnessRecord(
            "P1", "patient", 1, "M1", stats_triple(0, 1, -1), stats_triple(1, 2, 0)
        )
        b = SmoothnessRecord(
            "P2", "patient", 1, "M1", stats_triple(0, 1, -1), stats_triple(1, 2, 0)
        )
        with pytest.raises(ContractError):
            session_evolution([a, b])


PATIENT_EXPECTATIONS = {
    "patient_100": {
        "M1": {3, 4},
        "M2": set(),
        "M3": {2, 3, 4},
        "M4": {3},
    },
    "patient_101": {
        "M1": {2, 3, 4},
        "M2": set(),
        "M3": set(),
        "M4": set(),
    },
    "patient_102": {
        "M1": {2},
        "M2": {3, 4},
        "M3": {4},
        "M4": {2, 3, 4},
    },
    "patient_103": {
        "M1": set(),
        "M2": {3},
        "M3": {4},
        "M4": {3, 4},
    },
}


class TestReferenceEvolutionTables:
    @pytest.mark.parametrize("name", sorted(PATIENT_EXPECTATIONS))
    def test_improvement_sets_match_published_claims(self, name):
        flags = evolution_from_table(load_table(bundled_table(name)))
        for movement, expected in PATIENT_EXPECTATIONS[name].items():
            assert flags.improved(movement) == frozenset(expected), (name, movement)

    def test_three_patients_improve_in_three_or_more_movements(self):
        for name in ("patient_100", "patient_102", "patient_103"):
            flags = evolution_from_table(load_table(bundled_table(name)))
            assert len(flags.movements_with_improvement()) >= 3, name


class TestLoadTable:
    def test_cohort_and_session_detection(self):
        assert isinstance(load_table(bundled_table("cohort_jerk")), CohortTable)
        assert isinstance(load_table(bundled_table("patient_100")), SessionTable)

    def test_rejects_bad_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n")
        from kinemotion.errors import ParseError

        with pytest.raises(ParseError):
            load_table(bad)


class TestRenderReport:
    def test_cohort_table_csv_shows_published_means(self):
        table = load_table(bundled_table("cohort_squared_jerk"))
        text = render_report(table, "csv")
        rows = {r["movement"]: r for r in csv.DictReader(io.StringIO(text))}
        assert rows["M1"]["mean_healthy"] == "19.96"
        assert rows["M1"]["mean_patient"] == "7.65"
        header = text.splitlines()[0].split(",")
        assert header == [
            "movement",
            "mean_healthy",
            "mean_patient",
            "max_healthy",
            "max_patient",
            "min_healthy",
            "min_patient",
        ]

    def test_empty_flags_render_header_only(self):
        from kinemotion.smoothness import ImprovementFlags

        text = render_report(ImprovementFlags(axis="x", movements={}), "csv")
        assert text.strip() == "movement,baseline,improved_sessions"

    def test_csv_and_json_agree(self):
        table = load_table(bundled_table("cohort_jerk"))
        text = render_report(table, "csv")
        payload = json.loads(render_report(table, "json"))
        for row in csv.DictReader(io.StringIO(text)):
            movement = row["movement"]
            for statistic in ("mean", "max", "min"):
                for cohort in ("healthy", "patient"):
                    rendered = float(row[f"{statistic}_{cohort}"])
                    assert rendered == pytest.approx(
                        payload[movement][statistic][cohort], rel=1e-5
                    )

    def test_flags_csv_and_json_agree(self):
        flags = evolution_from_table(load_table(bundled_table("patient_102")))
        text = render_report(flags, "csv")
        payload = json.loads(render_report(flags, "json"))
        for row in csv.DictReader(io.StringIO(text)):
            movement = row["movement"]
            sessions = (
                sorted(int(s) for s in row["improved_sessions"].split(";"))
                if row["improved_sessions"]
                else []
            )
            assert sessions == payload["movements"][movement]["improved_sessions"]

    def test_session_table_renders_all_sessions(self):
        table = load_table(bundled_table("patient_103"))
        lines = render_report(table, "csv").splitlines()
        assert lines[0].split(",")[1:5] == [
            "mean_session1",
            "mean_session2",
            "mean_session3",
            "mean_session4",
        ]
        assert len(lines) == 5

    def test_six_significant_digits(self):
        table = CohortTable(
            values={
                "M1": {
                    "mean": {"healthy": 1.23456789, "patient": 0.000123456789},
                    "max": {"healthy": 123456.789, "patient": 1.0},
                    "min": {"healthy": 0.0, "patient": -9.87654321},
                }
            }
        )
        text = render_report(table, "csv")
        row = text.splitlines()[1].split(",")
        assert row[1] == "1.23457"
        assert row[2] == "0.000123457"
        assert row[3] == "123457"
