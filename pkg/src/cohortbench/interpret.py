"""Axis-3 interpretability: permutation importance and model consensus.

One attribution method for every model, native or external, because the
evaluation protocol is black-box: shuffle one feature column, measure the
accuracy drop, repeat, average. Per-model vectors are floored at zero and
L1-normalized before averaging into a consensus, so models with different
raw scales contribute equally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import ProbPrediction, confusion
from .rng import stream


@dataclass(frozen=True)
class ImportanceVector:
    """Per-feature attribution for one model (raw and normalized)."""

    scores: np.ndarray  # normalized: >= 0, sums to 1 unless uniform_fallback
    raw: np.ndarray  # mean accuracy drops; may be negative
    model_id: str
    uniform_fallback: bool = False  # raw had no positive mass


@dataclass(frozen=True)
class ConsensusReport:
    consensus: np.ndarray
    top_feature_votes: dict[str, int]
    per_model: tuple[ImportanceVector, ...]


def _accuracy(model, X, y) -> float:
    cm = confusion(ProbPrediction(np.asarray(model.predict_proba(X), dtype=float)), y)
    return (cm.tp + cm.tn) / cm.n


def permutation_importance(model, X, y, repeats: int = 5, seed: int = 0) -> np.ndarray:
    """Raw importance: mean accuracy drop when a column is shuffled.

    raw[j] = mean over `repeats` of (baseline acc − acc with column j
    permuted). The shuffle for (feature j, repeat r) comes from
    stream(seed, j*repeats + r), so the full vector is reproducible and
    each cell independently so. Queries are serialized: 1 + d*repeats
    prediction calls on one model session.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an n x d matrix with n >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    n, d = X.shape
    baseline = _accuracy(model, X, y)

    raw = np.zeros(d)
    for j in range(d):
        drops = []
        for r in range(repeats):
            perm = list(range(n))
            stream(seed, j * repeats + r).shuffle(perm)
            shuffled = X.copy()
            shuffled[:, j] = X[perm, j]
            drops.append(baseline - _accuracy(model, shuffled, y))
        raw[j] = float(np.mean(drops))
    return raw


def normalize_importance(raw) -> np.ndarray:
    """Floor negatives at zero, then L1-normalize; no mass -> uniform 1/d."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("raw importance must be a nonempty vector")
    floored = np.maximum(raw, 0.0)
    total = float(floored.sum())
    if total <= 0.0:
        return np.full(raw.size, 1.0 / raw.size)
    return floored / total


def make_importance(model_id: str, raw) -> ImportanceVector:
    """Bundle raw scores with their normalized form and fallback flag."""
    raw = np.asarray(raw, dtype=float)
    scores = normalize_importance(raw)
    return ImportanceVector(
        scores=scores,
        raw=raw,
        model_id=model_id,
        uniform_fallback=bool(np.all(np.maximum(raw, 0.0) == 0.0)),
    )


def consensus(importances) -> ConsensusReport:
    """Average normalized vectors; vote each model's top feature.

    The vote for a model goes to its highest-scoring feature, ties to the
    lower index. Feature keys are the screening-item names A1..A10 for
    d = 10, else F1..Fd.
    """
    vectors = tuple(importances)
    if not vectors:
        raise ValueError("consensus needs at least one importance vector")
    d = vectors[0].scores.size
    if any(v.scores.size != d for v in vectors):
        raise ValueError("importance vectors must share one length")

    prefix = "A" if d == 10 else "F"
    names = [f"{prefix}{i + 1}" for i in range(d)]
    votes: dict[str, int] = {}
    for v in vectors:
        top = names[int(np.argmax(v.scores))]  # argmax takes the first max
        votes[top] = votes.get(top, 0) + 1

    mean_scores = np.mean([v.scores for v in vectors], axis=0)
    return ConsensusReport(consensus=mean_scores, top_feature_votes=votes, per_model=vectors)
