"""Discrimination (axis 1) and calibration/uncertainty (axis 2) metrics.

Everything here is a pure function of a probability vector and a label
vector. Conventions that downstream code and tests rely on:

* A prediction is positive iff p >= threshold (ties go to the positive
  class — the cost model is false-negative-averse, so the boundary leans
  toward recall).
* Degenerate denominators (no predicted positives, no actual positives, …)
  yield a metric value of 0 together with a flag instead of an exception,
  so a full sweep never aborts on a pathological cell.
* Confidence of a binary probability p is max(p, 1-p) ∈ [0.5, 1].
* Spread statistics use the population convention (divide by n), matching
  the variance convention used by the ranking penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ProbPrediction:
    """Positive-class probabilities plus the decision threshold."""

    probs: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValueError("probs must be a 1-D vector")
        if p.size and (not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("probabilities must be finite and within [0, 1]")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if v < 0 or v != int(v):
                raise ValueError(f"{name} must be a non-negative integer")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class PerfMetrics:
    """Axis-1 bundle; `degenerate` names the metrics zeroed by a 0/0."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class CalibrationReport:
    """Axis-2 bundle over a prediction set."""

    ece: float
    brier: float
    mean_confidence: float
    std_confidence: float
    mean_entropy: float
    bins: int


def _check_lengths(probs, labels):
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("probs and labels must be 1-D vectors of equal length")
    if p.size == 0:
        raise ValueError("empty input")
    return p, y.astype(int)


def confusion(pred: ProbPrediction, labels) -> ConfusionMatrix:
    """Threshold probabilities and count the four cells."""
    p, y = _check_lengths(pred.probs, labels)
    pos = p >= pred.threshold
    actual = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pos & actual)),
        tn=int(np.sum(~pos & ~actual)),
        fp=int(np.sum(pos & ~actual)),
        fn=int(np.sum(~pos & actual)),
    )


def basic_metrics(cm: ConfusionMatrix) -> PerfMetrics:
    """Accuracy, precision, recall, F1 with degenerate-denominator flags."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    degenerate: list[str] = []

    accuracy = (cm.tp + cm.tn) / cm.n

    if cm.tp + cm.fp == 0:
        precision, flagged_p = 0.0, True
    else:
        precision, flagged_p = cm.tp / (cm.tp + cm.fp), False
    if flagged_p:
        degenerate.append("precision")

    if cm.tp + cm.fn == 0:
        recall = 0.0
        degenerate.append("recall")
    else:
        recall = cm.tp / (cm.tp + cm.fn)

    if precision + recall == 0.0:
        f1 = 0.0
        degenerate.append("f1")
    else:
        f1 = 2.0 * precision * recall / (precision + recall)

    return PerfMetrics(accuracy, precision, recall, f1, tuple(degenerate))


def auc_roc(probs, labels) -> float:
    """P(random positive outranks random negative), ties counting 1/2.

    Computed with midranks (Mann–Whitney); for our half-integer rank sums
    this is arithmetically identical to brute-force pair counting.
    """
    p, y = _check_lengths(probs, labels)
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both classes present")

    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    ranks = np.empty(y.size)
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1

    rank_sum_pos = float(np.sum(ranks[y == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def ece(probs, labels, bins: int = 10) -> float:
    """Expected calibration error over confidence bins on [0.5, 1.0].

    Bin index = min(bins-1, floor(conf · 2 · bins) − bins): equal-width bins
    over [0.5, 1.0], last bin right-inclusive. The multiplicative form keeps
    decimal confidences on their intuitive side of bin edges under binary
    floating point. Per bin: |mean correctness − mean confidence| weighted
    by bin mass; empty bins contribute nothing. Correctness is against the
    p >= 0.5 decision rule, consistent with `confusion`.
    """
    p, y = _check_lengths(probs, labels)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    conf = np.maximum(p, 1.0 - p)
    correct = ((p >= 0.5).astype(int) == y)

    idx = np.minimum(np.floor(conf * (2 * bins)).astype(int) - bins, bins - 1)
    total = 0.0
    n = p.size
    for b in range(bins):
        mask = idx == b
        m = int(np.sum(mask))
        if m == 0:
            continue
        acc = float(np.mean(correct[mask]))
        avg_conf = float(np.mean(conf[mask]))
        total += (m / n) * abs(acc - avg_conf)
    return total


def brier(probs, labels) -> float:
    """Mean squared error between P(positive) and the 0/1 label."""
    p, y = _check_lengths(probs, labels)
    return float(np.mean((p - y) ** 2))


def confidence_stats(probs) -> tuple[float, float]:
    """(mean, population std) of per-sample confidence max(p, 1-p)."""
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise ValueError("empty input")
    conf = np.maximum(p, 1.0 - p)
    return float(np.mean(conf)), float(np.std(conf))


def mean_entropy(probs) -> float:
    """Mean binary entropy in bits (so the range is [0, 1]); 0·log0 := 0."""
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise ValueError("empty input")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -(p * np.log2(p)) - (1.0 - p) * np.log2(1.0 - p)
    terms = np.where(np.isfinite(terms), terms, 0.0)
    return float(np.mean(terms))


def calibration_report(probs, labels, bins: int = 10) -> CalibrationReport:
    """Bundle all axis-2 metrics for one prediction set."""
    mean_conf, std_conf = confidence_stats(probs)
    return CalibrationReport(
        ece=ece(probs, labels, bins),
        brier=brier(probs, labels),
        mean_confidence=mean_conf,
        std_confidence=std_conf,
        mean_entropy=mean_entropy(probs),
        bins=bins,
    )
