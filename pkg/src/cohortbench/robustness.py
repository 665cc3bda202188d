"""Axis-4 perturbation harness: corrupt the test matrix, re-query, compare.

Three protocols, each at three levels (nine standard conditions):

* feature_flip k ∈ {0.10, 0.20, 0.30} — flip exactly round(k*n*d) distinct
  cells of the binary matrix, chosen uniformly without replacement;
* gaussian_noise sigma ∈ {0.1, 0.2, 0.3} — add N(0, sigma^2) per cell and
  clip to [0, 1] (binary features become continuous; models must cope);
* feature_removal k ∈ {1, 2, 3} — zero out the columns of the k most
  important features (per the attacked model's own importance vector),
  ties broken toward the lower feature index.

The composite score is R = 1 - mean(delta_acc) over the nine conditions.
Deltas may be negative (perturbation helps), so R may exceed 1; it is
reported unclamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import ProbPrediction, confusion
from .rng import SplitMix64

FLIP = "feature_flip"
NOISE = "gaussian_noise"
REMOVAL = "feature_removal"

#: The nine standard conditions, in evaluation (and seed-offset) order.
STANDARD_CONDITIONS: tuple[tuple[str, float], ...] = (
    (FLIP, 0.10),
    (FLIP, 0.20),
    (FLIP, 0.30),
    (NOISE, 0.1),
    (NOISE, 0.2),
    (NOISE, 0.3),
    (REMOVAL, 1),
    (REMOVAL, 2),
    (REMOVAL, 3),
)


@dataclass(frozen=True)
class PerturbationSpec:
    protocol: str
    level: float
    seed: int

    def __post_init__(self):
        if self.protocol not in (FLIP, NOISE, REMOVAL):
            raise ValueError(f"unknown protocol {self.protocol!r}")


@dataclass(frozen=True)
class ConditionResult:
    spec: PerturbationSpec
    perturbed_accuracy: float
    delta_acc: float


@dataclass(frozen=True)
class RobustnessReport:
    clean_accuracy: float
    per_condition: tuple[ConditionResult, ...]
    composite_r: float


def perturb_flip(X: np.ndarray, k: float, seed: int) -> np.ndarray:
    """Flip exactly round(k*n*d) distinct cells of a binary matrix.

    Cell selection is a partial Fisher–Yates over the flattened row-major
    cell indices, driven by SplitMix64(seed); round is half-away-from-zero.
    """
    X = np.asarray(X, dtype=float)
    if not np.all((X == 0.0) | (X == 1.0)):
        raise ValueError("perturb_flip requires a binary 0/1 matrix")
    if not 0.0 <= k <= 1.0:
        raise ValueError("flip fraction must be in [0, 1]")
    n, d = X.shape
    n_cells = int(np.floor(k * n * d + 0.5))
    out = X.copy()
    if n_cells == 0:
        return out
    chosen = SplitMix64(seed).sample_indices(n * d, n_cells)
    rows, cols = np.divmod(np.array(chosen), d)
    out[rows, cols] = 1.0 - out[rows, cols]
    return out


def perturb_gaussian(X: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add elementwise N(0, sigma^2) noise, then clip to [0, 1].

    Noise cells are drawn row-major from SplitMix64(seed) via the
    documented Box–Muller transform.
    """
    X = np.asarray(X, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    n, d = X.shape
    eps = SplitMix64(seed).normal_array(n * d).reshape(n, d)
    return np.clip(X + sigma * eps, 0.0, 1.0)


def perturb_removal(X: np.ndarray, importance, k: int) -> np.ndarray:
    """Zero the columns of the top-k most important features.

    `importance` is any length-d score vector (higher = more important);
    ties are broken toward the lower feature index.
    """
    X = np.asarray(X, dtype=float)
    scores = np.asarray(getattr(importance, "scores", importance), dtype=float)
    d = X.shape[1]
    if scores.shape != (d,):
        raise ValueError("importance length must match feature count")
    if not 1 <= k <= d:
        raise ValueError("k must be within 1..d")
    order = np.lexsort((np.arange(d), -scores))  # descending score, then index
    out = X.copy()
    out[:, order[:k]] = 0.0
    return out


def _perturbed(X: np.ndarray, spec: PerturbationSpec, importance) -> np.ndarray:
    if spec.protocol == FLIP:
        return perturb_flip(X, spec.level, spec.seed)
    if spec.protocol == NOISE:
        return perturb_gaussian(X, spec.level, spec.seed)
    return perturb_removal(X, importance, int(spec.level))


def _accuracy(probs, y) -> float:
    cm = confusion(ProbPrediction(np.asarray(probs, dtype=float)), y)
    return (cm.tp + cm.tn) / cm.n


def evaluate_robustness(model, X_test, y_test, importance, seed: int) -> RobustnessReport:
    """Run the nine standard conditions against a fitted model.

    `model` is anything with predict_proba(X) -> probability vector (a
    modelhost handle qualifies). Exactly ten prediction calls are made: one
    clean, one per condition. Condition i uses seed + i so any single
    condition can be reproduced in isolation.
    """
    X_test = np.asarray(X_test, dtype=float)
    clean_acc = _accuracy(model.predict_proba(X_test), y_test)

    results = []
    for i, (protocol, level) in enumerate(STANDARD_CONDITIONS):
        spec = PerturbationSpec(protocol=protocol, level=level, seed=seed + i)
        perturbed_acc = _accuracy(model.predict_proba(_perturbed(X_test, spec, importance)), y_test)
        results.append(
            ConditionResult(
                spec=spec,
                perturbed_accuracy=perturbed_acc,
                delta_acc=clean_acc - perturbed_acc,
            )
        )

    mean_delta = float(np.mean([r.delta_acc for r in results]))
    return RobustnessReport(
        clean_accuracy=clean_acc,
        per_condition=tuple(results),
        composite_r=1.0 - mean_delta,
    )


def robustness_band(r: float) -> str:
    """Traffic-light band: high >= 0.88 > medium >= 0.82 > critical."""
    if not np.isfinite(r):
        raise ValueError("composite robustness must be finite")
    if r >= 0.88:
        return "high"
    if r >= 0.82:
        return "medium"
    return "critical"
