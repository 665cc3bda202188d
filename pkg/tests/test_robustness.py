"""Perturbation protocol and composite-score tests."""

from __future__ import annotations

import numpy as np
import pytest

from cohortbench.interpret import ImportanceVector
from cohortbench.robustness import (
    FLIP,
    NOISE,
    REMOVAL,
    STANDARD_CONDITIONS,
    PerturbationSpec,
    evaluate_robustness,
    perturb_flip,
    perturb_gaussian,
    perturb_removal,
    robustness_band,
)
from cohortbench.rng import SplitMix64


def _binary_matrix(seed: int, n: int, d: int = 10) -> np.ndarray:
    rng = SplitMix64(seed)
    return np.array([[float(rng.below(2)) for _ in range(d)] for _ in range(n)])


class _ConstantModel:
    def __init__(self, p: float = 0.7):
        self.p = p
        self.calls = 0

    def predict_proba(self, X):
        self.calls += 1
        return np.full(len(X), self.p)


class _FirstFeatureModel:
    """Predicts p = value of the first feature; maximally perturbation-prone."""

    def predict_proba(self, X):
        return np.asarray(X, dtype=float)[:, 0]


# ---------------------------------------------------------------------------
# feature flips
# ---------------------------------------------------------------------------


def test_flip_zero_fraction_is_identity():
    X = _binary_matrix(1, 8)
    out = perturb_flip(X, 0.0, seed=3)
    assert np.array_equal(out, X)
    assert out is not X  # still a copy


def test_flip_full_fraction_flips_everything():
    X = _binary_matrix(2, 6)
    out = perturb_flip(X, 1.0, seed=3)
    assert np.array_equal(out, 1.0 - X)


def test_flip_changes_exactly_the_budgeted_cell_count():
    X = _binary_matrix(3, 10, 10)
    out = perturb_flip(X, 0.2, seed=11)
    assert int(np.sum(out != X)) == 20
    assert np.all((out == 0.0) | (out == 1.0))


def test_flip_rounds_half_away_from_zero():
    X = _binary_matrix(4, 5, 10)  # 50 cells; k=0.15 -> 7.5 -> 8
    out = perturb_flip(X, 0.15, seed=11)
    assert int(np.sum(out != X)) == 8


def test_flip_same_seed_same_cells_and_is_involution():
    X = _binary_matrix(5, 12)
    once = perturb_flip(X, 0.3, seed=42)
    again = perturb_flip(X, 0.3, seed=42)
    assert np.array_equal(once, again)
    restored = perturb_flip(once, 0.3, seed=42)
    assert np.array_equal(restored, X)


def test_flip_input_validation():
    X = _binary_matrix(6, 4)
    with pytest.raises(ValueError):
        perturb_flip(X, -0.1, seed=1)
    with pytest.raises(ValueError):
        perturb_flip(X, 1.1, seed=1)
    X_cont = X.copy()
    X_cont[0, 0] = 0.5
    with pytest.raises(ValueError):
        perturb_flip(X_cont, 0.1, seed=1)


# ---------------------------------------------------------------------------
# gaussian noise
# ---------------------------------------------------------------------------


def test_gaussian_vanishing_sigma_approaches_identity():
    X = _binary_matrix(7, 9)
    out = perturb_gaussian(X, 1e-12, seed=5)
    assert np.allclose(out, X, atol=1e-9)


def test_gaussian_output_is_clipped():
    X = _binary_matrix(8, 20)
    out = perturb_gaussian(X, 0.5, seed=5)
    assert out.min() >= 0.0 and out.max() <= 1.0
    # saturated cells stay exactly at the rails
    assert np.any(out == 1.0) and np.any(out == 0.0)


def test_gaussian_noise_scale_moment_check():
    eps = SplitMix64(31).normal_array(10_000)
    assert abs(float(np.std(0.2 * eps)) - 0.2) < 0.01


def test_gaussian_matches_documented_construction_bitwise():
    X = _binary_matrix(9, 25, 10)
    seed = 77
    eps = SplitMix64(seed).normal_array(250).reshape(25, 10)
    expect = np.clip(X + 0.2 * eps, 0.0, 1.0)
    assert np.array_equal(perturb_gaussian(X, 0.2, seed), expect)


def test_gaussian_rejects_nonpositive_sigma():
    X = _binary_matrix(10, 4)
    with pytest.raises(ValueError):
        perturb_gaussian(X, 0.0, seed=1)
    with pytest.raises(ValueError):
        perturb_gaussian(X, -0.2, seed=1)


# ---------------------------------------------------------------------------
# feature removal
# ---------------------------------------------------------------------------


def test_removal_of_all_features_zeroes_the_matrix():
    X = _binary_matrix(11, 6)
    out = perturb_removal(X, np.linspace(1, 2, 10), k=10)
    assert np.array_equal(out, np.zeros_like(X))


def test_removal_targets_the_top_scored_column():
    X = np.ones((4, 10))
    scores = np.zeros(10)
    scores[4] = 1.0  # A5
    out = perturb_removal(X, scores, k=1)
    assert np.all(out[:, 4] == 0.0)
    kept = [j for j in range(10) if j != 4]
    assert np.all(out[:, kept] == 1.0)


def test_removal_breaks_ties_toward_lower_index():
    X = np.ones((3, 10))
    scores = np.zeros(10)
    scores[1] = scores[6] = 0.5  # A2 and A7 tied
    out = perturb_removal(X, scores, k=1)
    assert np.all(out[:, 1] == 0.0)
    assert np.all(out[:, 6] == 1.0)


def test_removal_accepts_importance_vector_objects():
    X = np.ones((2, 10))
    iv = ImportanceVector(
        scores=tuple(1.0 if j == 2 else 0.0 for j in range(10)),
        raw=tuple(0.0 for _ in range(10)),
        model_id="m",
    )
    out = perturb_removal(X, iv, k=1)
    assert np.all(out[:, 2] == 0.0)


def test_removal_input_validation():
    X = _binary_matrix(12, 4)
    with pytest.raises(ValueError):
        perturb_removal(X, np.ones(9), k=1)
    with pytest.raises(ValueError):
        perturb_removal(X, np.ones(10), k=0)
    with pytest.raises(ValueError):
        perturb_removal(X, np.ones(10), k=11)


# ---------------------------------------------------------------------------
# evaluation harness
# ---------------------------------------------------------------------------


def test_standard_conditions_table():
    assert STANDARD_CONDITIONS == (
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


def test_spec_rejects_unknown_protocol():
    with pytest.raises(ValueError):
        PerturbationSpec(protocol="label_shuffle", level=0.1, seed=0)


def test_constant_model_is_perfectly_robust():
    X = _binary_matrix(13, 30)
    y = np.array([1] * 15 + [0] * 15)
    model = _ConstantModel(0.7)
    report = evaluate_robustness(model, X, y, np.ones(10), seed=50)
    assert report.composite_r == 1.0  # exact, not approximate
    assert all(r.delta_acc == 0.0 for r in report.per_condition)
    assert model.calls == 10  # one clean + nine conditions


def test_condition_seeds_and_order():
    X = _binary_matrix(14, 20)
    y = np.array([1] * 10 + [0] * 10)
    report = evaluate_robustness(_ConstantModel(), X, y, np.ones(10), seed=200)
    specs = [r.spec for r in report.per_condition]
    assert [(s.protocol, s.level) for s in specs] == list(STANDARD_CONDITIONS)
    assert [s.seed for s in specs] == [200 + i for i in range(9)]


def test_composite_is_one_minus_mean_delta():
    X = _binary_matrix(15, 40)
    y = (X[:, 0] > 0.5).astype(int)
    if len(set(y.tolist())) == 1:  # pragma: no cover - seed guard
        y[0] = 1 - y[0]
    report = evaluate_robustness(_FirstFeatureModel(), X, y, np.eye(10)[0], seed=9)
    deltas = [r.delta_acc for r in report.per_condition]
    assert report.composite_r == pytest.approx(1.0 - float(np.mean(deltas)), abs=1e-15)
    assert report.clean_accuracy == 1.0
    assert report.composite_r < 1.0  # flipping the only used feature must hurt


def test_single_condition_reproducible_in_isolation():
    X = _binary_matrix(16, 25)
    y = np.array([1] * 12 + [0] * 13)
    seed = 300
    report = evaluate_robustness(_FirstFeatureModel(), X, y, np.eye(10)[0], seed=seed)
    third = report.per_condition[2]  # (FLIP, 0.30) at seed+2
    redone = perturb_flip(X, 0.30, seed=seed + 2)
    probs = _FirstFeatureModel().predict_proba(redone)
    acc = float(np.mean((probs >= 0.5).astype(int) == y))
    assert third.perturbed_accuracy == pytest.approx(acc, abs=1e-15)


# ---------------------------------------------------------------------------
# banding
# ---------------------------------------------------------------------------


def test_band_examples():
    assert robustness_band(0.933) == "high"
    assert robustness_band(0.84) == "medium"
    assert robustness_band(0.815) == "critical"


def test_band_boundaries_are_bit_exact():
    assert robustness_band(0.88) == "high"
    assert robustness_band(np.nextafter(0.88, 0.0)) == "medium"
    assert robustness_band(0.82) == "medium"
    assert robustness_band(np.nextafter(0.82, 0.0)) == "critical"


def test_band_rejects_non_finite():
    with pytest.raises(ValueError):
        robustness_band(float("nan"))
    with pytest.raises(ValueError):
        robustness_band(float("inf"))
