"""Benchmark orchestration.

Runs the full grid (cohorts x models x four axes), aggregates the
cost-variance penalty over cross-validation folds, fits the penalty-weight
SNR curve per cohort, sweeps the cost ratio for ranking stability, builds
the normalized scorecard and deployment recommendations, and renders the
report artifacts.

Determinism contract: with native models, identical RunConfig produces
byte-identical report files. Evaluation cells may run in a bounded worker
pool, but every per-cell seed is derived from (run seed, cohort index,
model index) and assembly sorts by (cohort_id, model_id), so parallelism
never changes output bytes.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hap import (
    DEFAULT_RATIO_GRID,
    HapResult,
    PenaltyWeights,
    SensitivityResult,
    SnrCurve,
    fit_snr_curve,
    fold_cost,
    hap_score,
    sensitivity_sweep,
    snr,
)
from .ingest import COHORT_IDS, CohortDataset, DataError, FoldPlan, load_csv, make_fold_plan
from .interpret import ConsensusReport, ImportanceVector, consensus, make_importance, permutation_importance
from .metrics import (
    CalibrationReport,
    ConfusionMatrix,
    ProbPrediction,
    auc_roc,
    basic_metrics,
    calibration_report,
    confusion,
)
from .modelhost import ModelError, ModelSpec, fit, shutdown
from .robustness import (
    ConditionResult,
    PerturbationSpec,
    RobustnessReport,
    evaluate_robustness,
    robustness_band,
)
from .rng import stream

log = logging.getLogger(__name__)

ECE_GATE = 0.12
SETTINGS = ("general", "noisy")
REPORT_FILES = (
    "report.json",
    "metrics.csv",
    "importance.csv",
    "robustness.csv",
    "hap.csv",
    "recommendations.md",
)

# Penalty-weight curve domain. The ratio sweep and the operating point
# both live well inside [0, 20]; larger weights sit in the dispersive
# regime where rankings track variance instead of cost, so the curve fit
# stops there.
LAMBDA_GRID = tuple(float(v) for v in np.linspace(0.0, 20.0, 2001))

_IMPORTANCE_REPEATS = 5


class PipelineError(RuntimeError):
    """A whole cohort (or the run itself) could not be evaluated."""


class ConfigError(ValueError):
    """Run configuration is malformed."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    cohorts: tuple[tuple[str, str], ...]  # (cohort_id, csv path)
    models: tuple[ModelSpec, ...]
    seed: int = 42
    test_frac: float = 0.2
    folds: int = 5
    weights: PenaltyWeights = PenaltyWeights()
    lambda_mode: str = "fixed"  # "fixed" -> lambda_value; "auto" -> per-cohort maximizer
    lambda_value: float = 1.0
    ece_bins: int = 10
    ratio_grid: tuple[float, ...] = DEFAULT_RATIO_GRID
    out_dir: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if not self.cohorts:
            raise ConfigError("need at least one cohort")
        if not self.models:
            raise ConfigError("need at least one model")
        ids = [cid for cid, _ in self.cohorts]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate cohort ids")
        for cid in ids:
            if cid not in COHORT_IDS:
                raise ConfigError(f"unknown cohort id {cid!r}")
        mids = [m.model_id for m in self.models]
        if len(set(mids)) != len(mids):
            raise ConfigError("duplicate model ids")
        if not 0.0 < self.test_frac < 1.0:
            raise ConfigError("test_frac must be in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.lambda_mode not in ("fixed", "auto"):
            raise ConfigError("lambda_mode must be 'fixed' or 'auto'")
        if not (np.isfinite(self.lambda_value) and self.lambda_value >= 0):
            raise ConfigError("lambda_value must be finite and >= 0")
        if self.ece_bins < 1:
            raise ConfigError("ece_bins must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


_CONFIG_KEYS = {
    "cohorts",
    "models",
    "seed",
    "test_frac",
    "folds",
    "weights",
    "lambda_mode",
    "lambda_value",
    "ece_bins",
    "ratio_grid",
    "out_dir",
    "jobs",
}


def config_from_dict(raw: dict, base_dir=None) -> RunConfig:
    """Build a RunConfig from parsed JSON; relative paths resolve against
    base_dir (normally the config file's directory)."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    base = Path(base_dir) if base_dir is not None else Path(".")

    try:
        cohorts = tuple(
            (entry["id"], str((base / entry["path"]).resolve()))
            for entry in raw.get("cohorts", [])
        )
        models = tuple(
            ModelSpec(
                model_id=entry["model_id"],
                kind=entry["kind"],
                params=entry.get("params", {}),
                command=entry.get("command"),
                fit_timeout=float(entry.get("fit_timeout", 60.0)),
                predict_timeout=float(entry.get("predict_timeout", 30.0)),
            )
            for entry in raw.get("models", [])
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed cohort/model entry: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    weights = raw.get("weights", {})
    if isinstance(weights, (list, tuple)):
        if len(weights) != 2:
            raise ConfigError("weights list must be [w_fp, w_fn]")
        weights = {"w_fp": weights[0], "w_fn": weights[1]}
    try:
        pw = PenaltyWeights(
            w_fp=float(weights.get("w_fp", 2.0)), w_fn=float(weights.get("w_fn", 10.0))
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad weights: {exc}") from exc

    out_dir = raw.get("out_dir")
    if out_dir is not None:
        out_dir = str((base / out_dir).resolve())
    try:
        return RunConfig(
            cohorts=cohorts,
            models=models,
            seed=int(raw.get("seed", 42)),
            test_frac=float(raw.get("test_frac", 0.2)),
            folds=int(raw.get("folds", 5)),
            weights=pw,
            lambda_mode=raw.get("lambda_mode", "fixed"),
            lambda_value=float(raw.get("lambda_value", 1.0)),
            ece_bins=int(raw.get("ece_bins", 10)),
            ratio_grid=tuple(float(r) for r in raw.get("ratio_grid", DEFAULT_RATIO_GRID)),
            out_dir=out_dir,
            jobs=int(raw.get("jobs", 1)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of config_from_dict (paths come back absolute)."""
    return {
        "cohorts": [{"id": cid, "path": path} for cid, path in cfg.cohorts],
        "models": [
            {
                "model_id": m.model_id,
                "kind": m.kind,
                "params": m.params,
                "command": m.command,
                "fit_timeout": m.fit_timeout,
                "predict_timeout": m.predict_timeout,
            }
            for m in cfg.models
        ],
        "seed": cfg.seed,
        "test_frac": cfg.test_frac,
        "folds": cfg.folds,
        "weights": {"w_fp": cfg.weights.w_fp, "w_fn": cfg.weights.w_fn},
        "lambda_mode": cfg.lambda_mode,
        "lambda_value": cfg.lambda_value,
        "ece_bins": cfg.ece_bins,
        "ratio_grid": list(cfg.ratio_grid),
        "out_dir": cfg.out_dir,
        "jobs": cfg.jobs,
    }


# --------------------------------------------------------------------------
# result types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    """One (model, cohort) cell; either complete or failed-with-error."""

    model_id: str
    cohort_id: str
    error: str | None = None
    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    auc: float | None = None
    degenerate_metrics: tuple[str, ...] = ()
    confusion: ConfusionMatrix | None = None
    calibration: CalibrationReport | None = None
    importance: ImportanceVector | None = None
    robustness: RobustnessReport | None = None
    hap: HapResult | None = None
    fold_confusions: tuple[ConfusionMatrix, ...] | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def calibration_critical(self) -> bool | None:
        if self.calibration is None:
            return None
        return self.calibration.ece > ECE_GATE

    @property
    def band(self) -> str | None:
        if self.robustness is None:
            return None
        return robustness_band(self.robustness.composite_r)


@dataclass(frozen=True)
class CohortAnalysis:
    """Per-cohort cross-model aggregates (curve, sweep, consensus)."""

    cohort_id: str
    lambda_used: float
    snr_curve: SnrCurve | None = None
    snr_at_one: float | None = None
    sensitivity: SensitivityResult | None = None
    consensus: ConsensusReport | None = None


@dataclass(frozen=True)
class ScorecardRow:
    model_id: str
    cohort_id: str
    f1: float
    auc: float
    calibration: float  # 1 - ECE
    robustness: float  # composite R clamped to [0, 1] for display
    robustness_raw: float


@dataclass(frozen=True)
class Recommendation:
    cohort_id: str
    setting: str
    model_id: str
    calibration_warning: bool
    reason: str


@dataclass(frozen=True)
class BenchReport:
    records: tuple[EvalRecord, ...]
    analyses: tuple[CohortAnalysis, ...]
    scorecard: tuple[ScorecardRow, ...]
    recommendations: tuple[Recommendation, ...]


# --------------------------------------------------------------------------
# per-cell evaluation
# --------------------------------------------------------------------------


def _derived_seed(seed: int, cohort_idx: int, model_idx: int, channel: int) -> int:
    """Stable per-cell seed, independent of execution order. Kept under
    2**53 so it survives a JSON round-trip to adapters."""
    tag = ((cohort_idx + 1) << 20) | ((model_idx + 1) << 4) | channel
    return int(stream(seed, tag).next_u64() >> 12)


def _evaluate_cell(
    ds: CohortDataset,
    plan: FoldPlan,
    spec: ModelSpec,
    cfg: RunConfig,
    cohort_idx: int,
    model_idx: int,
) -> EvalRecord:
    X, y = ds.features, ds.labels
    train_idx = np.array(plan.train_indices)
    test_idx = np.array(plan.test_indices)
    handle = None
    try:
        handle = fit(spec, X[train_idx], y[train_idx], cfg.seed)

        probs = handle.predict_proba(X[test_idx])
        y_test = y[test_idx]
        cm = confusion(ProbPrediction(probs), y_test)
        perf = basic_metrics(cm)
        auc = auc_roc(probs, y_test)
        cal = calibration_report(probs, y_test, cfg.ece_bins)

        imp_raw = permutation_importance(
            handle,
            X[test_idx],
            y_test,
            repeats=_IMPORTANCE_REPEATS,
            seed=_derived_seed(cfg.seed, cohort_idx, model_idx, 1),
        )
        imp = make_importance(spec.model_id, imp_raw)
        rob = evaluate_robustness(
            handle,
            X[test_idx],
            y_test,
            imp,
            seed=_derived_seed(cfg.seed, cohort_idx, model_idx, 2),
        )

        fold_cms = []
        for fold in plan.folds:
            held = set(fold)
            tr = np.array([i for i in plan.train_indices if i not in held])
            handle.refit(X[tr], y[tr], cfg.seed)
            fold_probs = handle.predict_proba(X[np.array(fold)])
            fold_cms.append(confusion(ProbPrediction(fold_probs), y[np.array(fold)]))

        return EvalRecord(
            model_id=spec.model_id,
            cohort_id=ds.cohort_id,
            accuracy=perf.accuracy,
            precision=perf.precision,
            recall=perf.recall,
            f1=perf.f1,
            auc=auc,
            degenerate_metrics=perf.degenerate,
            confusion=cm,
            calibration=cal,
            importance=imp,
            robustness=rob,
            fold_confusions=tuple(fold_cms),
        )
    except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
        log.warning("cell (%s, %s) failed: %s", spec.model_id, ds.cohort_id, exc)
        return EvalRecord(
            model_id=spec.model_id,
            cohort_id=ds.cohort_id,
            error=f"{type(exc).__name__}: {exc}",
        )
    finally:
        if handle is not None:
            try:
                shutdown(handle)
            except Exception:  # noqa: BLE001
                log.warning("shutdown failed for %s", spec.model_id, exc_info=True)


# --------------------------------------------------------------------------
# run + assembly
# --------------------------------------------------------------------------


def run_benchmark(cfg: RunConfig) -> BenchReport:
    """Evaluate every (model, cohort) cell and assemble the report.

    Individual cell failures are recorded and skipped in aggregates; a
    cohort where *every* model fails raises PipelineError.
    """
    datasets: dict[str, CohortDataset] = {}
    plans: dict[str, FoldPlan] = {}
    for cid, path in cfg.cohorts:
        ds = load_csv(path, cid)
        datasets[cid] = ds
        plans[cid] = make_fold_plan(ds, cfg.seed, cfg.test_frac, cfg.folds)

    cells = [
        (ci, cid, mi, spec)
        for ci, (cid, _) in enumerate(cfg.cohorts)
        for mi, spec in enumerate(cfg.models)
    ]
    results: dict[tuple[int, int], EvalRecord] = {}
    if cfg.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {
                pool.submit(_evaluate_cell, datasets[cid], plans[cid], spec, cfg, ci, mi): (ci, mi)
                for ci, cid, mi, spec in cells
            }
            for fut, key in futures.items():
                results[key] = fut.result()
    else:
        for ci, cid, mi, spec in cells:
            results[(ci, mi)] = _evaluate_cell(datasets[cid], plans[cid], spec, cfg, ci, mi)

    records: list[EvalRecord] = []
    analyses: list[CohortAnalysis] = []
    for ci, (cid, _) in sorted(enumerate(cfg.cohorts), key=lambda t: t[1][0]):
        cohort_records = [results[(ci, mi)] for mi in range(len(cfg.models))]
        complete = sorted(
            (r for r in cohort_records if not r.failed), key=lambda r: r.model_id
        )
        if not complete:
            first = cohort_records[0].error
            raise PipelineError(f"all models failed on cohort {cid} (first error: {first})")

        fold_costs = {
            r.model_id: [fold_cost(cm, cfg.weights) for cm in r.fold_confusions]
            for r in complete
        }
        base = {mid: hap_score(costs, 0.0) for mid, costs in fold_costs.items()}
        mus = [base[r.model_id].mean_cost for r in complete]
        variances = [base[r.model_id].cost_variance for r in complete]

        curve = None
        snr_at_one = None
        if len(complete) >= 2:
            try:
                curve = fit_snr_curve(mus, variances, LAMBDA_GRID)
                snr_at_one = snr(1.0, mus, variances)
            except ValueError as exc:
                log.warning("SNR curve skipped for %s: %s", cid, exc)

        lam = cfg.lambda_value
        if cfg.lambda_mode == "auto" and curve is not None:
            lam = curve.lambda_star

        sens = None
        if len(complete) >= 2:
            sens = sensitivity_sweep(
                {r.model_id: r.fold_confusions for r in complete},
                cfg.ratio_grid,
                lam=1.0,
            )
        cons = consensus([r.importance for r in complete])

        for r in sorted(cohort_records, key=lambda r: r.model_id):
            if r.failed:
                records.append(r)
            else:
                records.append(_with_hap(r, hap_score(fold_costs[r.model_id], lam)))
        analyses.append(
            CohortAnalysis(
                cohort_id=cid,
                lambda_used=float(lam),
                snr_curve=curve,
                snr_at_one=snr_at_one,
                sensitivity=sens,
                consensus=cons,
            )
        )

    records.sort(key=lambda r: (r.cohort_id, r.model_id))
    analyses.sort(key=lambda a: a.cohort_id)
    scorecard = build_scorecard(records)
    recommendations = tuple(
        _recommend_full(records, a.cohort_id, setting)
        for a in analyses
        for setting in SETTINGS
    )
    return BenchReport(
        records=tuple(records),
        analyses=tuple(analyses),
        scorecard=scorecard,
        recommendations=recommendations,
    )


def _with_hap(record: EvalRecord, hap: HapResult) -> EvalRecord:
    return EvalRecord(
        **{
            **{f: getattr(record, f) for f in record.__dataclass_fields__},
            "hap": hap,
        }
    )


# --------------------------------------------------------------------------
# scorecard + recommendations
# --------------------------------------------------------------------------


def build_scorecard(records) -> tuple[ScorecardRow, ...]:
    """Map complete records onto [0, 1] axes: F1 and AUC as-is,
    calibration as 1 - ECE, robustness as composite R clamped for display
    (raw value kept alongside)."""
    rows = []
    for r in records:
        if r.failed:
            continue
        raw = r.robustness.composite_r
        rows.append(
            ScorecardRow(
                model_id=r.model_id,
                cohort_id=r.cohort_id,
                f1=float(r.f1),
                auc=float(r.auc),
                calibration=float(1.0 - r.calibration.ece),
                robustness=float(min(1.0, max(0.0, raw))),
                robustness_raw=float(raw),
            )
        )
    return tuple(rows)


def _recommend_full(records, cohort: str, setting: str) -> Recommendation:
    pool = [r for r in records if r.cohort_id == cohort and not r.failed]
    if not pool:
        raise PipelineError(f"no complete records for cohort {cohort!r}")
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")

    candidates = [r for r in pool if r.calibration.ece <= ECE_GATE]
    if not candidates:
        best = min(pool, key=lambda r: (-r.f1, -r.auc, r.hap.hap, r.model_id))
        return Recommendation(
            cohort_id=cohort,
            setting=setting,
            model_id=best.model_id,
            calibration_warning=True,
            reason="no model meets the calibration gate; best F1 overall",
        )

    if setting == "general":
        best = min(candidates, key=lambda r: (-r.f1, -r.auc, r.hap.hap, r.model_id))
        reason = "best F1 among calibration-safe models"
    else:
        floor = 0.9 * max(r.f1 for r in candidates)
        shortlist = [r for r in candidates if r.f1 >= floor]
        best = min(
            shortlist,
            key=lambda r: (-r.robustness.composite_r, r.calibration.ece, r.model_id),
        )
        reason = "most robust calibration-safe model within 90% of top F1"
    return Recommendation(
        cohort_id=cohort,
        setting=setting,
        model_id=best.model_id,
        calibration_warning=False,
        reason=reason,
    )


def recommend(records, cohort: str, setting: str) -> str:
    """Deployment pick for one cohort and setting; see _recommend_full."""
    return _recommend_full(records, cohort, setting).model_id


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _cm_dict(cm: ConfusionMatrix) -> dict:
    return {"tp": int(cm.tp), "tn": int(cm.tn), "fp": int(cm.fp), "fn": int(cm.fn)}


def _cm_load(d: dict) -> ConfusionMatrix:
    return ConfusionMatrix(tp=d["tp"], tn=d["tn"], fp=d["fp"], fn=d["fn"])


def record_to_dict(r: EvalRecord) -> dict:
    if r.failed:
        return {"model_id": r.model_id, "cohort_id": r.cohort_id, "error": r.error}
    return {
        "model_id": r.model_id,
        "cohort_id": r.cohort_id,
        "error": None,
        "axis1": {
            "accuracy": float(r.accuracy),
            "precision": float(r.precision),
            "recall": float(r.recall),
            "f1": float(r.f1),
            "auc": float(r.auc),
            "degenerate": list(r.degenerate_metrics),
            "confusion": _cm_dict(r.confusion),
        },
        "axis2": {
            "ece": float(r.calibration.ece),
            "brier": float(r.calibration.brier),
            "mean_confidence": float(r.calibration.mean_confidence),
            "std_confidence": float(r.calibration.std_confidence),
            "mean_entropy": float(r.calibration.mean_entropy),
            "bins": int(r.calibration.bins),
        },
        "axis3": {
            "model_id": r.importance.model_id,
            "scores": [float(v) for v in r.importance.scores],
            "raw": [float(v) for v in r.importance.raw],
            "uniform_fallback": bool(r.importance.uniform_fallback),
        },
        "axis4": {
            "clean_accuracy": float(r.robustness.clean_accuracy),
            "composite_r": float(r.robustness.composite_r),
            "conditions": [
                {
                    "protocol": c.spec.protocol,
                    "level": float(c.spec.level),
                    "seed": int(c.spec.seed),
                    "perturbed_accuracy": float(c.perturbed_accuracy),
                    "delta_acc": float(c.delta_acc),
                }
                for c in r.robustness.per_condition
            ],
        },
        "hap": {
            "fold_costs": [float(v) for v in r.hap.fold_costs],
            "mean_cost": float(r.hap.mean_cost),
            "cost_variance": float(r.hap.cost_variance),
            "lambda": float(r.hap.lam),
            "hap": float(r.hap.hap),
        },
        "fold_confusions": [_cm_dict(cm) for cm in r.fold_confusions],
        "flags": {
            "calibration_critical": bool(r.calibration_critical),
            "robustness_band": r.band,
        },
    }


def record_from_dict(d: dict) -> EvalRecord:
    if d.get("error") is not None:
        return EvalRecord(model_id=d["model_id"], cohort_id=d["cohort_id"], error=d["error"])
    a1, a2, a3, a4, hp = d["axis1"], d["axis2"], d["axis3"], d["axis4"], d["hap"]
    return EvalRecord(
        model_id=d["model_id"],
        cohort_id=d["cohort_id"],
        accuracy=a1["accuracy"],
        precision=a1["precision"],
        recall=a1["recall"],
        f1=a1["f1"],
        auc=a1["auc"],
        degenerate_metrics=tuple(a1["degenerate"]),
        confusion=_cm_load(a1["confusion"]),
        calibration=CalibrationReport(
            ece=a2["ece"],
            brier=a2["brier"],
            mean_confidence=a2["mean_confidence"],
            std_confidence=a2["std_confidence"],
            mean_entropy=a2["mean_entropy"],
            bins=a2["bins"],
        ),
        importance=ImportanceVector(
            scores=np.array(a3["scores"], dtype=float),
            raw=np.array(a3["raw"], dtype=float),
            model_id=a3["model_id"],
            uniform_fallback=a3["uniform_fallback"],
        ),
        robustness=RobustnessReport(
            clean_accuracy=a4["clean_accuracy"],
            per_condition=tuple(
                ConditionResult(
                    spec=PerturbationSpec(
                        protocol=c["protocol"], level=c["level"], seed=c["seed"]
                    ),
                    perturbed_accuracy=c["perturbed_accuracy"],
                    delta_acc=c["delta_acc"],
                )
                for c in a4["conditions"]
            ),
            composite_r=a4["composite_r"],
        ),
        hap=HapResult(
            fold_costs=tuple(hp["fold_costs"]),
            mean_cost=hp["mean_cost"],
            cost_variance=hp["cost_variance"],
            lam=hp["lambda"],
            hap=hp["hap"],
        ),
        fold_confusions=tuple(_cm_load(c) for c in d["fold_confusions"]),
    )


def analysis_to_dict(a: CohortAnalysis) -> dict:
    out: dict = {"cohort_id": a.cohort_id, "lambda_used": float(a.lambda_used)}
    out["snr_curve"] = (
        None
        if a.snr_curve is None
        else {
            "a": float(a.snr_curve.a),
            "b": float(a.snr_curve.b),
            "c": float(a.snr_curve.c),
            "d": float(a.snr_curve.d),
            "e": float(a.snr_curve.e),
            "lambda_star": float(a.snr_curve.lambda_star),
            "snr_at_star": float(a.snr_curve.snr_at_star),
            "degenerate": bool(a.snr_curve.degenerate),
        }
    )
    out["snr_at_one"] = None if a.snr_at_one is None else float(a.snr_at_one)
    out["sensitivity"] = (
        None
        if a.sensitivity is None
        else {
            "ratios": [float(v) for v in a.sensitivity.ratios],
            "model_ids": list(a.sensitivity.model_ids),
            "rankings": [[float(v) for v in row] for row in a.sensitivity.rankings],
            "kendall_w": float(a.sensitivity.kendall_w),
        }
    )
    out["consensus"] = (
        None
        if a.consensus is None
        else {
            "consensus": [float(v) for v in a.consensus.consensus],
            "top_feature_votes": {k: int(v) for k, v in a.consensus.top_feature_votes.items()},
            "model_ids": [iv.model_id for iv in a.consensus.per_model],
        }
    )
    return out


def analysis_from_dict(d: dict, records: tuple[EvalRecord, ...]) -> CohortAnalysis:
    curve = d["snr_curve"]
    sens = d["sensitivity"]
    cons = d["consensus"]
    per_model = tuple(
        r.importance
        for r in records
        if r.cohort_id == d["cohort_id"] and not r.failed
    )
    return CohortAnalysis(
        cohort_id=d["cohort_id"],
        lambda_used=d["lambda_used"],
        snr_curve=None
        if curve is None
        else SnrCurve(
            a=curve["a"],
            b=curve["b"],
            c=curve["c"],
            d=curve["d"],
            e=curve["e"],
            lambda_star=curve["lambda_star"],
            snr_at_star=curve["snr_at_star"],
            degenerate=curve["degenerate"],
        ),
        snr_at_one=d["snr_at_one"],
        sensitivity=None
        if sens is None
        else SensitivityResult(
            ratios=tuple(sens["ratios"]),
            model_ids=tuple(sens["model_ids"]),
            rankings=np.array(sens["rankings"], dtype=float),
            kendall_w=sens["kendall_w"],
        ),
        consensus=None
        if cons is None
        else ConsensusReport(
            consensus=np.array(cons["consensus"], dtype=float),
            top_feature_votes=dict(cons["top_feature_votes"]),
            per_model=per_model,
        ),
    )


def report_to_dict(report: BenchReport) -> dict:
    return {
        "records": [record_to_dict(r) for r in report.records],
        "cohort_analyses": [analysis_to_dict(a) for a in report.analyses],
        "scorecard": [
            {
                "model_id": s.model_id,
                "cohort_id": s.cohort_id,
                "f1": float(s.f1),
                "auc": float(s.auc),
                "calibration": float(s.calibration),
                "robustness": float(s.robustness),
                "robustness_raw": float(s.robustness_raw),
            }
            for s in report.scorecard
        ],
        "recommendations": [
            {
                "cohort_id": rec.cohort_id,
                "setting": rec.setting,
                "model_id": rec.model_id,
                "calibration_warning": rec.calibration_warning,
                "reason": rec.reason,
            }
            for rec in report.recommendations
        ],
    }


def report_from_dict(d: dict) -> BenchReport:
    records = tuple(record_from_dict(r) for r in d["records"])
    return BenchReport(
        records=records,
        analyses=tuple(analysis_from_dict(a, records) for a in d["cohort_analyses"]),
        scorecard=tuple(
            ScorecardRow(
                model_id=s["model_id"],
                cohort_id=s["cohort_id"],
                f1=s["f1"],
                auc=s["auc"],
                calibration=s["calibration"],
                robustness=s["robustness"],
                robustness_raw=s["robustness_raw"],
            )
            for s in d["scorecard"]
        ),
        recommendations=tuple(
            Recommendation(
                cohort_id=r["cohort_id"],
                setting=r["setting"],
                model_id=r["model_id"],
                calibration_warning=r["calibration_warning"],
                reason=r["reason"],
            )
            for r in d["recommendations"]
        ),
    )


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _check_internal_consistency(report: BenchReport) -> None:
    for r in report.records:
        if r.failed:
            continue
        costs = np.array(r.hap.fold_costs)
        rebuilt = float(np.mean(costs) + r.hap.lam * np.var(costs))
        if abs(rebuilt - r.hap.hap) > 1e-12 * max(1.0, abs(r.hap.hap)):
            raise PipelineError(
                f"HAP reconstruction mismatch for ({r.model_id}, {r.cohort_id}): "
                f"{rebuilt} != {r.hap.hap}"
            )
        if basic_metrics(r.confusion).f1 != r.f1:
            raise PipelineError(
                f"F1/confusion mismatch for ({r.model_id}, {r.cohort_id})"
            )


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _metrics_csv(report: BenchReport) -> str:
    header = [
        "cohort_id",
        "model_id",
        "status",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "auc",
        "degenerate_metrics",
        "tp",
        "tn",
        "fp",
        "fn",
        "ece",
        "brier",
        "mean_confidence",
        "std_confidence",
        "mean_entropy",
        "lambda",
        "hap",
        "mean_cost",
        "cost_variance",
        "composite_r",
        "robustness_band",
        "calibration_critical",
        "error",
    ]
    rows = []
    for r in report.records:
        if r.failed:
            rows.append(
                [r.cohort_id, r.model_id, "failed"] + [""] * (len(header) - 4) + [r.error]
            )
            continue
        rows.append(
            [
                r.cohort_id,
                r.model_id,
                "ok",
                _fmt(r.accuracy),
                _fmt(r.precision),
                _fmt(r.recall),
                _fmt(r.f1),
                _fmt(r.auc),
                "|".join(r.degenerate_metrics),
                r.confusion.tp,
                r.confusion.tn,
                r.confusion.fp,
                r.confusion.fn,
                _fmt(r.calibration.ece),
                _fmt(r.calibration.brier),
                _fmt(r.calibration.mean_confidence),
                _fmt(r.calibration.std_confidence),
                _fmt(r.calibration.mean_entropy),
                _fmt(r.hap.lam),
                _fmt(r.hap.hap),
                _fmt(r.hap.mean_cost),
                _fmt(r.hap.cost_variance),
                _fmt(r.robustness.composite_r),
                r.band,
                _fmt(r.calibration_critical),
                "",
            ]
        )
    return _csv_text(header, rows)


def _feature_names(report: BenchReport) -> list[str]:
    for r in report.records:
        if not r.failed:
            d = len(r.importance.scores)
            return [f"A{i}" for i in range(1, d + 1)] if d == 10 else [
                f"F{i}" for i in range(1, d + 1)
            ]
    return [f"A{i}" for i in range(1, 11)]


def _importance_csv(report: BenchReport) -> str:
    names = _feature_names(report)
    header = ["cohort_id", "model_id", "uniform_fallback"] + names
    rows = []
    for r in report.records:
        if r.failed:
            continue
        rows.append(
            [r.cohort_id, r.model_id, _fmt(r.importance.uniform_fallback)]
            + [_fmt(v) for v in r.importance.scores]
        )
    for a in report.analyses:
        if a.consensus is not None:
            rows.append(
                [a.cohort_id, "(consensus)", ""] + [_fmt(v) for v in a.consensus.consensus]
            )
    return _csv_text(header, rows)


def _robustness_csv(report: BenchReport) -> str:
    header = [
        "cohort_id",
        "model_id",
        "protocol",
        "level",
        "seed",
        "clean_accuracy",
        "perturbed_accuracy",
        "delta_acc",
    ]
    rows = []
    for r in report.records:
        if r.failed:
            continue
        for c in r.robustness.per_condition:
            rows.append(
                [
                    r.cohort_id,
                    r.model_id,
                    c.spec.protocol,
                    _fmt(c.spec.level),
                    c.spec.seed,
                    _fmt(r.robustness.clean_accuracy),
                    _fmt(c.perturbed_accuracy),
                    _fmt(c.delta_acc),
                ]
            )
    return _csv_text(header, rows)


def _hap_csv(report: BenchReport) -> str:
    n_folds = 5
    for r in report.records:
        if not r.failed:
            n_folds = len(r.hap.fold_costs)
            break
    header = (
        ["cohort_id", "model_id"]
        + [f"fold_cost_{k + 1}" for k in range(n_folds)]
        + [
            "mean_cost",
            "cost_variance",
            "lambda",
            "hap",
            "cohort_lambda_star",
            "cohort_snr_at_star",
            "cohort_snr_at_one",
            "curve_degenerate",
        ]
    )
    curves = {a.cohort_id: a for a in report.analyses}
    rows = []
    for r in report.records:
        if r.failed:
            continue
        a = curves.get(r.cohort_id)
        curve = a.snr_curve if a else None
        rows.append(
            [r.cohort_id, r.model_id]
            + [_fmt(v) for v in r.hap.fold_costs]
            + [
                _fmt(r.hap.mean_cost),
                _fmt(r.hap.cost_variance),
                _fmt(r.hap.lam),
                _fmt(r.hap.hap),
                _fmt(curve.lambda_star) if curve else "",
                _fmt(curve.snr_at_star) if curve else "",
                _fmt(a.snr_at_one) if a else "",
                _fmt(curve.degenerate) if curve else "",
            ]
        )
    return _csv_text(header, rows)


def _recommendations_md(report: BenchReport) -> str:
    by_key = {(r.cohort_id, r.model_id): r for r in report.records if not r.failed}
    lines = [
        "# Deployment recommendations",
        "",
        "| cohort | setting | model | F1 | ECE | composite R | note |",
        "|---|---|---|---|---|---|---|",
    ]
    for rec in report.recommendations:
        r = by_key.get((rec.cohort_id, rec.model_id))
        f1 = f"{r.f1:.4f}" if r else ""
        ece = f"{r.calibration.ece:.4f}" if r else ""
        rr = f"{r.robustness.composite_r:.4f}" if r else ""
        note = rec.reason + (" **(calibration warning)**" if rec.calibration_warning else "")
        lines.append(
            f"| {rec.cohort_id} | {rec.setting} | {rec.model_id} | {f1} | {ece} | {rr} | {note} |"
        )
    lines.append("")
    return "\n".join(lines)


def render_report_files(report: BenchReport) -> dict[str, str]:
    """All report artifacts as {filename: content}; validates internal
    consistency (HAP reconstruction, F1-vs-confusion) before rendering."""
    _check_internal_consistency(report)
    return {
        "report.json": json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        "metrics.csv": _metrics_csv(report),
        "importance.csv": _importance_csv(report),
        "robustness.csv": _robustness_csv(report),
        "hap.csv": _hap_csv(report),
        "recommendations.md": _recommendations_md(report),
    }


def emit_reports(report: BenchReport, out_dir) -> list[str]:
    """Write all report artifacts into out_dir; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, content in render_report_files(report).items():
        path = out / name
        path.write_text(content, encoding="utf-8")
        paths.append(str(path))
    return sorted(paths)
