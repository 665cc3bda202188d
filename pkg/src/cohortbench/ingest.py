"""Cohort CSV loading, validation, de-duplication, and deterministic splits.

Input format (UTF-8, comma-separated, header row): ten screening-item
columns ``A1`` .. ``A10`` with cell values 0/1, a label column ``class``
(0/1, 1 = screen-positive), and optionally ``source``, ``age``, ``gender``,
``ethnicity`` — parsed when present but never used as features. Missing
values are errors; there is no imputation.

Splits are stratified and bit-stable: the same (seed, labels) always yield
the same plan, on any platform, because all shuffling runs through the
documented SplitMix64 streams (see `cohortbench.rng`).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .rng import stream

log = logging.getLogger(__name__)

COHORT_IDS = ("child", "adolescent", "adult")
FEATURE_NAMES = tuple(f"A{i}" for i in range(1, 11))
LABEL_COLUMN = "class"
OPTIONAL_COLUMNS = ("source", "age", "gender", "ethnicity")
N_FEATURES = 10


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class CohortDataset:
    """One cohort: n×10 feature matrix, labels, optional provenance tags."""

    cohort_id: str
    features: np.ndarray  # float matrix, binary 0/1 at load time
    labels: np.ndarray  # int vector of {0,1}
    source_tags: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.cohort_id not in COHORT_IDS:
            raise DataError(f"unknown cohort_id {self.cohort_id!r}")
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[1] != N_FEATURES:
            raise DataError(f"features must be n x {N_FEATURES}")
        if X.shape[0] == 0:
            raise DataError("empty dataset")
        if y.shape != (X.shape[0],):
            raise DataError("labels length must match feature rows")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0/1")
        if len(set(y.tolist())) < 2:
            raise DataError("single-class data")
        if self.source_tags is not None and len(self.source_tags) != X.shape[0]:
            raise DataError("source_tags length must match feature rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class FoldPlan:
    """Stratified 80/20 split plus a stratified K-fold partition of train."""

    seed: int
    test_indices: tuple[int, ...]
    train_indices: tuple[int, ...]
    folds: tuple[tuple[int, ...], ...]


def _parse_cell(value: str, column: str, row_num: int) -> int:
    v = value.strip()
    if v == "0":
        return 0
    if v == "1":
        return 1
    raise DataError(f"non-binary value {value!r} in column {column}, data row {row_num}")


def load_csv(path, cohort_id: str) -> CohortDataset:
    """Load and validate one cohort file. Row order is preserved."""
    if cohort_id not in COHORT_IDS:
        raise DataError(f"unknown cohort_id {cohort_id!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        missing = [c for c in FEATURE_NAMES + (LABEL_COLUMN,) if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")

        rows: list[list[int]] = []
        labels: list[int] = []
        tags: list[str] = []
        has_source = "source" in header
        for row_num, rec in enumerate(reader, start=1):
            if any(rec.get(c) is None for c in FEATURE_NAMES + (LABEL_COLUMN,)):
                raise DataError(f"{path}: short row at data row {row_num}")
            rows.append([_parse_cell(rec[c], c, row_num) for c in FEATURE_NAMES])
            labels.append(_parse_cell(rec[LABEL_COLUMN], LABEL_COLUMN, row_num))
            if has_source:
                tags.append(rec["source"].strip())

    if not rows:
        raise DataError(f"{path}: no data rows")
    return CohortDataset(
        cohort_id=cohort_id,
        features=np.array(rows, dtype=float),
        labels=np.array(labels, dtype=int),
        source_tags=tuple(tags) if has_source else None,
    )


def deduplicate(ds: CohortDataset) -> tuple[CohortDataset, int]:
    """Drop exact (features, label) duplicates, keeping first occurrences.

    Rows that agree on features but disagree on the label are *not*
    duplicates; they are all kept, and their presence is logged as a
    warning (see also `label_conflict_count`).
    """
    seen: set[tuple] = set()
    keep: list[int] = []
    for i in range(ds.n):
        key = (tuple(ds.features[i].tolist()), int(ds.labels[i]))
        if key in seen:
            continue
        seen.add(key)
        keep.append(i)

    removed = ds.n - len(keep)
    conflicts = label_conflict_count(ds)
    if conflicts:
        log.warning(
            "%s: %d feature pattern(s) appear with conflicting labels; all kept",
            ds.cohort_id,
            conflicts,
        )
    if removed == 0:
        return ds, 0

    labels = ds.labels[keep]
    if len(set(labels.tolist())) < 2:
        raise DataError("deduplication left single-class data")
    return (
        CohortDataset(
            cohort_id=ds.cohort_id,
            features=ds.features[keep],
            labels=labels,
            source_tags=tuple(ds.source_tags[i] for i in keep) if ds.source_tags else None,
        ),
        removed,
    )


def label_conflict_count(ds: CohortDataset) -> int:
    """Number of feature patterns that occur with both labels."""
    by_pattern: dict[tuple, set[int]] = {}
    for i in range(ds.n):
        by_pattern.setdefault(tuple(ds.features[i].tolist()), set()).add(int(ds.labels[i]))
    return sum(1 for labels in by_pattern.values() if len(labels) > 1)


def make_fold_plan(ds: CohortDataset, seed: int, test_frac: float = 0.2, k: int = 5) -> FoldPlan:
    """Deterministic stratified 80/20 split + stratified K folds of train.

    Per class c: shuffle that class's row indices with stream(seed, c),
    reserve round(test_frac * n_c) of them for test (half rounds away from
    zero), and deal the rest round-robin to the K folds, continuing the deal
    across classes so fold sizes stay balanced even when one class is tiny.
    Every fold and the test set stay within one sample of the global class
    ratio.
    """
    if not 0.0 < test_frac < 1.0:
        raise DataError("test_frac must be in (0, 1)")
    if k < 2:
        raise DataError("k must be >= 2")
    if ds.n < 2 * k:
        raise DataError("dataset too small for the requested fold count")

    test: list[int] = []
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0  # one dealing position shared by both classes, so no fold is left empty
    for cls in (0, 1):
        members = [i for i in range(ds.n) if ds.labels[i] == cls]
        r = stream(seed, cls)
        r.shuffle(members)
        n_test = int(np.floor(test_frac * len(members) + 0.5))
        if len(members) - n_test < 2:
            # every fold-complement must keep both classes, so each class has
            # to land in at least two folds
            raise DataError(f"class {cls} too small for stratified {k}-fold split")
        test.extend(members[:n_test])
        for idx in members[n_test:]:
            folds[cursor % k].append(idx)
            cursor += 1

    train = sorted(i for fold in folds for i in fold)
    return FoldPlan(
        seed=seed,
        test_indices=tuple(sorted(test)),
        train_indices=tuple(train),
        folds=tuple(tuple(sorted(f)) for f in folds),
    )


def aq10_screen_score(row) -> tuple[int, bool]:
    """Total of the ten binary items and the screen flag (total >= 6)."""
    r = np.asarray(row, dtype=float)
    if r.shape != (N_FEATURES,):
        raise DataError(f"screening row must have exactly {N_FEATURES} items")
    if not np.all((r == 0.0) | (r == 1.0)):
        raise DataError("screening items must be binary 0/1")
    score = int(r.sum())
    return score, score >= 6
