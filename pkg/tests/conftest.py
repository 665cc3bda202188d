"""Shared fixtures: the synthetic cohort files and one full native-model
benchmark run, both session-scoped because they are by far the most
expensive things the suite does."""

from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from cohortbench.ingest import COHORT_IDS
from cohortbench.modelhost import ModelSpec
from cohortbench.pipeline import BenchReport, RunConfig, run_benchmark
from cohortbench.synth import write_all

NATIVE_SPECS = (
    ModelSpec(model_id="majority", kind="native_majority"),
    ModelSpec(model_id="logreg", kind="native_logreg"),
    ModelSpec(model_id="knn", kind="native_knn"),
)


@dataclass(frozen=True)
class BenchRun:
    config: RunConfig
    report: BenchReport
    elapsed_s: float


@pytest.fixture(scope="session")
def cohort_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohorts")
    write_all(root)
    return root


@pytest.fixture(scope="session")
def bench_config(cohort_dir) -> RunConfig:
    return RunConfig(
        cohorts=tuple((cid, str(cohort_dir / f"{cid}.csv")) for cid in COHORT_IDS),
        models=NATIVE_SPECS,
        seed=42,
    )


@pytest.fixture(scope="session")
def bench_run(bench_config) -> BenchRun:
    start = time.perf_counter()
    report = run_benchmark(bench_config)
    return BenchRun(config=bench_config, report=report, elapsed_s=time.perf_counter() - start)


@pytest.fixture(scope="session")
def bench_report(bench_run) -> BenchReport:
    return bench_run.report


def write_small_cohort(path, n_pos: int = 30, n_neg: int = 30, with_source: bool = False):
    """A tiny but trainable cohort CSV: positives carry six set items,
    negatives three, rotating through the columns so patterns vary."""
    header = [f"A{i}" for i in range(1, 11)] + ["class"]
    if with_source:
        header.insert(10, "source")
    lines = [",".join(header)]
    for i in range(n_pos):
        row = [0] * 10
        for j in range(6):
            row[(i + j) % 10] = 1
        cells = [str(v) for v in row]
        if with_source:
            cells.append("v1" if i % 2 == 0 else "v2")
        lines.append(",".join(cells + ["1"]))
    for i in range(n_neg):
        row = [0] * 10
        for j in range(3):
            row[(i + j) % 10] = 1
        cells = [str(v) for v in row]
        if with_source:
            cells.append("v1")
        lines.append(",".join(cells + ["0"]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_cohort_csv(tmp_path):
    return write_small_cohort(tmp_path / "child.csv")
