"""Synthetic cohort generator tests."""

from __future__ import annotations

import numpy as np
import pytest

from cohortbench.ingest import COHORT_IDS, aq10_screen_score, load_csv
from cohortbench.synth import (
    COHORT_SIZES,
    DEFAULT_SYNTH_SEED,
    build_cohort,
    write_all,
    write_cohort_csv,
)

_EXPECTED_SIZES = {"child": 2514, "adolescent": 818, "adult": 736}
_PREVALENCE_WINDOWS = {
    "child": (0.55, 0.65),
    "adolescent": (0.47, 0.57),
    "adult": (0.22, 0.32),
}
_AGE_RANGES = {"child": (1, 11), "adolescent": (12, 16), "adult": (17, 64)}
_HEADER = "A1,A2,A3,A4,A5,A6,A7,A8,A9,A10,age,gender,ethnicity,source,class"


def test_cohort_sizes_are_pinned():
    assert COHORT_SIZES == _EXPECTED_SIZES
    for cid, n in _EXPECTED_SIZES.items():
        assert len(build_cohort(cid)) == n


def test_written_files_load_with_exact_counts(cohort_dir):
    for cid, n in _EXPECTED_SIZES.items():
        ds = load_csv(cohort_dir / f"{cid}.csv", cid)
        assert ds.n == n
        assert ds.source_tags is not None and len(ds.source_tags) == n


def test_write_all_reports_counts(tmp_path):
    counts = write_all(tmp_path / "out")
    assert counts == _EXPECTED_SIZES
    for cid in COHORT_IDS:
        assert (tmp_path / "out" / f"{cid}.csv").exists()


def test_csv_header_is_stable(cohort_dir):
    for cid in COHORT_IDS:
        first = (cohort_dir / f"{cid}.csv").read_text(encoding="utf-8").splitlines()[0]
        assert first == _HEADER


def test_generation_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cohort_csv(a, "adolescent")
    write_cohort_csv(b, "adolescent")
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_changes_content(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_cohort_csv(a, "child", seed=DEFAULT_SYNTH_SEED)
    write_cohort_csv(b, "child", seed=DEFAULT_SYNTH_SEED + 1)
    assert a.read_bytes() != b.read_bytes()


def test_prevalence_lands_in_cohort_windows(cohort_dir):
    for cid, (lo, hi) in _PREVALENCE_WINDOWS.items():
        ds = load_csv(cohort_dir / f"{cid}.csv", cid)
        prevalence = float(np.mean(ds.labels))
        assert lo <= prevalence <= hi, f"{cid}: {prevalence:.4f} outside [{lo}, {hi}]"


def test_adult_labels_follow_the_screening_rule_exactly():
    for row in build_cohort("adult"):
        items = [row[f"A{i}"] for i in range(1, 11)]
        _, flag = aq10_screen_score(items)
        assert row["class"] == int(flag)


def test_noisy_cohorts_disagree_with_their_base_rule():
    # child/adolescent labels carry asymmetric flips, so agreement with the
    # plain screening rule must be high but strictly imperfect
    rows = build_cohort("child")
    flags = [int(aq10_screen_score([r[f"A{i}"] for i in range(1, 11)])[1]) for r in rows]
    agree = float(np.mean([f == r["class"] for f, r in zip(flags, rows)]))
    assert 0.9 < agree < 1.0


def test_demographics_are_in_range():
    for cid, (lo, hi) in _AGE_RANGES.items():
        rows = build_cohort(cid)
        ages = [r["age"] for r in rows]
        assert min(ages) >= lo and max(ages) <= hi
        assert {r["gender"] for r in rows} <= {"f", "m"}
        assert {r["source"] for r in rows} <= {"v1", "v2"}
        assert all(r[f"A{i}"] in (0, 1) for r in rows[:50] for i in range(1, 11))


def test_unknown_cohort_is_rejected():
    with pytest.raises(KeyError):
        build_cohort("toddler")
