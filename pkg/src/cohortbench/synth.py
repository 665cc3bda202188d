"""Deterministic synthetic screening cohorts.

The public questionnaire datasets this tool is normally pointed at cannot be
redistributed here, so this module builds structural stand-ins with the same
shape: three age cohorts (2514 / 818 / 736 rows), ten binary items A1..A10,
a binary label, and the demographic columns screening files usually carry.

Construction, per cohort:

* each respondent is drawn from a two-component Bernoulli mixture (a
  "high-trait" and a "low-trait" item profile); within a component the item
  probabilities come from one of two presentation subtypes, which spreads
  responses over more distinct answer patterns than a single profile would;
* the base label is a weighted item-sum rule crossing a threshold, with the
  weight profile differing by cohort (one item dominates the child rule, a
  different one leads the adolescent rule, the adult rule is unweighted);
* asymmetric label noise then flips a fraction of base-positive rows to
  negative (and a much smaller fraction the other way), so that child and
  adolescent labels are noisy in a way that caps achievable F1, while the
  adult cohort stays exactly linearly separable.

Class balance lands near 60/40 for children, 53/47 for adolescents, and
26/74 for adults, so the majority-class baseline behaves differently per
cohort (all-positive on the first two, all-negative on adults).

Everything is driven by the deterministic generator in `rng`, so a given
(seed, cohort) pair always yields byte-identical CSV files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .ingest import COHORT_IDS, FEATURE_NAMES, LABEL_COLUMN
from .rng import stream

DEFAULT_SYNTH_SEED = 1729

GENDERS = ("f", "m")
ETHNICITIES = (
    "white-european",
    "asian",
    "middle-eastern",
    "black",
    "hispanic",
    "south-asian",
    "turkish",
    "mixed",
    "other",
)
SOURCE_TAGS = ("v1", "v2")

# stream channels, per cohort
_CH_MIX = 0
_CH_FEAT = 1
_CH_NOISE = 2
_CH_DEMO = 3


@dataclass(frozen=True)
class CohortRecipe:
    n: int
    mix_high: float  # P(high-trait component)
    p_high: tuple[tuple[float, ...], ...]  # subtype profiles, high component
    p_low: tuple[tuple[float, ...], ...]  # subtype profiles, low component
    rule_weights: tuple[int, ...]
    threshold: int
    flip_pos: float  # P(recorded 0 | rule says 1)
    flip_neg: float  # P(recorded 1 | rule says 0)
    age_range: tuple[int, int]


RECIPES: dict[str, CohortRecipe] = {
    # A9 carries triple weight: the child rule leans hardest on one item.
    # The mixture components sit far from the threshold so nearly all label
    # disagreement comes from the asymmetric flip noise, not the boundary.
    "child": CohortRecipe(
        n=2514,
        mix_high=0.63,
        p_high=(
            (0.84, 0.80, 0.76, 0.83, 0.79, 0.81, 0.77, 0.82, 0.93, 0.78),
            (0.76, 0.85, 0.81, 0.74, 0.86, 0.75, 0.84, 0.73, 0.91, 0.83),
        ),
        p_low=(
            (0.15, 0.11, 0.14, 0.12, 0.16, 0.13, 0.10, 0.15, 0.08, 0.12),
            (0.11, 0.16, 0.10, 0.15, 0.12, 0.14, 0.13, 0.11, 0.09, 0.16),
        ),
        rule_weights=(1, 1, 1, 1, 1, 1, 1, 1, 3, 1),
        threshold=6,
        flip_pos=0.04,
        flip_neg=0.004,
        age_range=(1, 11),
    ),
    # A5 leads and A9 is pure noise here — the item hierarchy shifts with
    # age. Heavier label noise makes this the hardest cohort. Four subtypes
    # (vs two elsewhere) because the small cohort otherwise piles onto a
    # handful of identical answer patterns.
    "adolescent": CohortRecipe(
        n=818,
        mix_high=0.60,
        p_high=(
            (0.83, 0.80, 0.84, 0.81, 0.96, 0.80, 0.83, 0.79, 0.45, 0.81),
            (0.77, 0.85, 0.79, 0.86, 0.95, 0.76, 0.84, 0.80, 0.45, 0.78),
            (0.86, 0.74, 0.82, 0.77, 0.97, 0.83, 0.78, 0.85, 0.45, 0.74),
            (0.74, 0.82, 0.75, 0.84, 0.95, 0.85, 0.77, 0.74, 0.45, 0.86),
        ),
        p_low=(
            (0.14, 0.11, 0.15, 0.12, 0.07, 0.13, 0.10, 0.14, 0.45, 0.12),
            (0.10, 0.15, 0.12, 0.14, 0.08, 0.11, 0.16, 0.10, 0.45, 0.15),
            (0.16, 0.09, 0.13, 0.11, 0.06, 0.15, 0.12, 0.16, 0.45, 0.10),
            (0.12, 0.14, 0.10, 0.16, 0.09, 0.12, 0.14, 0.11, 0.45, 0.13),
        ),
        rule_weights=(1, 1, 1, 1, 3, 1, 1, 1, 0, 1),
        threshold=6,
        flip_pos=0.09,
        flip_neg=0.004,
        age_range=(12, 16),
    ),
    # Unweighted sum-of-items rule with no label noise: exactly the
    # questionnaire's own screening rule, and exactly linearly separable.
    # Screen-positive adults are the minority, so the majority baseline
    # predicts negative here.
    "adult": CohortRecipe(
        n=736,
        mix_high=0.27,
        p_high=(
            (0.83, 0.78, 0.81, 0.80, 0.77, 0.84, 0.79, 0.82, 0.80, 0.78),
            (0.77, 0.84, 0.76, 0.82, 0.81, 0.78, 0.83, 0.75, 0.82, 0.80),
        ),
        p_low=(
            (0.21, 0.18, 0.22, 0.19, 0.23, 0.17, 0.20, 0.22, 0.18, 0.21),
            (0.17, 0.23, 0.18, 0.22, 0.19, 0.21, 0.16, 0.20, 0.23, 0.18),
        ),
        rule_weights=(1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
        threshold=6,
        flip_pos=0.0,
        flip_neg=0.0,
        age_range=(17, 64),
    ),
}

COHORT_SIZES = {cid: RECIPES[cid].n for cid in COHORT_IDS}


def _cohort_tag(cohort_id: str, channel: int) -> int:
    return COHORT_IDS.index(cohort_id) * 8 + channel


def build_cohort(cohort_id: str, seed: int = DEFAULT_SYNTH_SEED) -> list[dict]:
    """All rows of one cohort, as dicts keyed by CSV column name."""
    recipe = RECIPES[cohort_id]
    rng_mix = stream(seed, _cohort_tag(cohort_id, _CH_MIX))
    rng_feat = stream(seed, _cohort_tag(cohort_id, _CH_FEAT))
    rng_noise = stream(seed, _cohort_tag(cohort_id, _CH_NOISE))
    rng_demo = stream(seed, _cohort_tag(cohort_id, _CH_DEMO))

    age_lo, age_hi = recipe.age_range
    rows = []
    for _ in range(recipe.n):
        subtypes = recipe.p_high if rng_mix.uniform() < recipe.mix_high else recipe.p_low
        profile = subtypes[rng_mix.below(len(subtypes))]
        items = [1 if rng_feat.uniform() < p else 0 for p in profile]
        score = sum(w * a for w, a in zip(recipe.rule_weights, items))
        label = 1 if score >= recipe.threshold else 0
        if label == 1:
            if recipe.flip_pos > 0 and rng_noise.uniform() < recipe.flip_pos:
                label = 0
        else:
            if recipe.flip_neg > 0 and rng_noise.uniform() < recipe.flip_neg:
                label = 1

        row = {name: items[i] for i, name in enumerate(FEATURE_NAMES)}
        row["age"] = age_lo + rng_demo.below(age_hi - age_lo + 1)
        row["gender"] = GENDERS[rng_demo.below(len(GENDERS))]
        row["ethnicity"] = ETHNICITIES[rng_demo.below(len(ETHNICITIES))]
        row["source"] = SOURCE_TAGS[rng_demo.below(len(SOURCE_TAGS))]
        row[LABEL_COLUMN] = label
        rows.append(row)
    return rows


_COLUMNS = list(FEATURE_NAMES) + ["age", "gender", "ethnicity", "source", LABEL_COLUMN]


def write_cohort_csv(path, cohort_id: str, seed: int = DEFAULT_SYNTH_SEED) -> int:
    """Write one cohort file; returns the row count."""
    rows = build_cohort(cohort_id, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)


def write_all(out_dir, seed: int = DEFAULT_SYNTH_SEED) -> dict[str, int]:
    """Write child.csv / adolescent.csv / adult.csv into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        cohort_id: write_cohort_csv(out / f"{cohort_id}.csv", cohort_id, seed)
        for cohort_id in COHORT_IDS
    }
