"""HTTP face of the benchmark.

Thin request/response wrapper over the core package: the CLI talks to this
app in-process via an ASGI transport by default, or over the network when
pointed at a running server. The service never writes report files — it
returns rendered file contents and leaves persistence to the caller.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .hap import PenaltyWeights, fit_snr_curve, fold_cost, hap_score, sensitivity_sweep, snr
from .ingest import (
    COHORT_IDS,
    DataError,
    aq10_screen_score,
    deduplicate,
    label_conflict_count,
    load_csv,
    make_fold_plan,
)
from .interpret import make_importance, permutation_importance
from .metrics import ConfusionMatrix, ProbPrediction, confusion
from .modelhost import ModelError, ModelSpec, fit, shutdown
from .pipeline import (
    LAMBDA_GRID,
    ConfigError,
    PipelineError,
    config_from_dict,
    render_report_files,
    report_to_dict,
    run_benchmark,
)
from .robustness import FLIP, NOISE, REMOVAL, perturb_flip, perturb_gaussian, perturb_removal


class RunRequest(BaseModel):
    config: dict


class HapRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    confusions: dict[str, list[list[int]]]  # model_id -> [[tp, tn, fp, fn] per fold]
    weights: tuple[float, float] = (2.0, 10.0)
    lam: float | str = Field(default=1.0, alias="lambda")
    sweep: bool = False


class PerturbRequest(BaseModel):
    csv_text: str
    cohort_id: str
    model: dict
    protocol: str
    level: float
    seed: int = 42
    test_frac: float = 0.2


class ValidateRequest(BaseModel):
    csv_text: str
    cohort_id: str


def _load_csv_text(text: str, cohort_id: str):
    with tempfile.NamedTemporaryFile(
        "w", suffix=".csv", delete=False, encoding="utf-8"
    ) as fh:
        fh.write(text)
        path = fh.name
    try:
        return load_csv(path, cohort_id)
    finally:
        Path(path).unlink(missing_ok=True)


def _model_spec(entry: dict) -> ModelSpec:
    try:
        return ModelSpec(
            model_id=entry["model_id"],
            kind=entry["kind"],
            params=entry.get("params", {}),
            command=entry.get("command"),
            fit_timeout=float(entry.get("fit_timeout", 60.0)),
            predict_timeout=float(entry.get("predict_timeout", 30.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"bad model spec: {exc}") from exc


def create_app() -> FastAPI:
    app = FastAPI(title="cohortbench", version="0.1.0")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/run")
    def run(req: RunRequest):
        try:
            cfg = config_from_dict(req.config)
            report = run_benchmark(cfg)
        except (ConfigError, DataError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except PipelineError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "report": report_to_dict(report),
            "files": render_report_files(report),
            "partial_failures": any(r.failed for r in report.records),
        }

    @app.post("/hap")
    def hap(req: HapRequest):
        try:
            weights = PenaltyWeights(w_fp=req.weights[0], w_fn=req.weights[1])
            cms = {}
            for mid, folds in req.confusions.items():
                if len(folds) < 2:
                    raise ValueError(f"model {mid!r}: need >= 2 folds")
                cms[mid] = [
                    ConfusionMatrix(tp=f[0], tn=f[1], fp=f[2], fn=f[3]) for f in folds
                ]
            costs = {mid: [fold_cost(cm, weights) for cm in folds] for mid, folds in cms.items()}
            order = sorted(costs)
            base = {mid: hap_score(costs[mid], 0.0) for mid in order}
            mus = [base[mid].mean_cost for mid in order]
            variances = [base[mid].cost_variance for mid in order]

            curve = None
            if req.lam == "auto" or len(order) >= 2:
                try:
                    curve = fit_snr_curve(mus, variances, LAMBDA_GRID) if len(order) >= 2 else None
                except ValueError:
                    curve = None
            if req.lam == "auto":
                if curve is None:
                    raise ValueError("auto lambda needs >= 2 models with a fittable curve")
                lam = curve.lambda_star
            else:
                lam = float(req.lam)

            scored = {mid: hap_score(costs[mid], lam) for mid in order}
            out = {
                "lambda": lam,
                "models": {
                    mid: {
                        "fold_costs": [float(v) for v in scored[mid].fold_costs],
                        "mean_cost": scored[mid].mean_cost,
                        "cost_variance": scored[mid].cost_variance,
                        "hap": scored[mid].hap,
                    }
                    for mid in order
                },
                "curve": None
                if curve is None
                else {
                    "lambda_star": curve.lambda_star,
                    "snr_at_star": curve.snr_at_star,
                    "snr_at_one": snr(1.0, mus, variances),
                    "degenerate": curve.degenerate,
                },
            }
            if req.sweep:
                if len(order) < 2:
                    raise ValueError("sweep needs >= 2 models")
                sens = sensitivity_sweep(cms, lam=1.0)
                out["sweep"] = {
                    "ratios": [float(v) for v in sens.ratios],
                    "model_ids": list(sens.model_ids),
                    "rankings": [[float(v) for v in row] for row in sens.rankings],
                    "kendall_w": sens.kendall_w,
                }
            return out
        except (ValueError, IndexError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/perturb")
    def perturb(req: PerturbRequest):
        if req.protocol not in (FLIP, NOISE, REMOVAL, "flip", "noise", "removal"):
            raise HTTPException(status_code=400, detail=f"unknown protocol {req.protocol!r}")
        protocol = {
            "flip": FLIP,
            "noise": NOISE,
            "removal": REMOVAL,
        }.get(req.protocol, req.protocol)
        spec = _model_spec(req.model)
        try:
            ds = _load_csv_text(req.csv_text, req.cohort_id)
            plan = make_fold_plan(ds, req.seed, req.test_frac)
            X, y = ds.features, ds.labels
            train = np.array(plan.train_indices)
            test = np.array(plan.test_indices)
            handle = fit(spec, X[train], y[train], req.seed)
            try:
                clean_probs = handle.predict_proba(X[test])
                clean_cm = confusion(ProbPrediction(clean_probs), y[test])
                clean_acc = (clean_cm.tp + clean_cm.tn) / clean_cm.n

                if protocol == FLIP:
                    Xp = perturb_flip(X[test], req.level, req.seed)
                elif protocol == NOISE:
                    Xp = perturb_gaussian(X[test], req.level, req.seed)
                else:
                    raw = permutation_importance(handle, X[test], y[test], seed=req.seed)
                    imp = make_importance(spec.model_id, raw)
                    Xp = perturb_removal(X[test], imp, int(req.level))

                pert_probs = handle.predict_proba(Xp)
                pert_cm = confusion(ProbPrediction(pert_probs), y[test])
                pert_acc = (pert_cm.tp + pert_cm.tn) / pert_cm.n
            finally:
                shutdown(handle)
        except (DataError, ModelError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "model_id": spec.model_id,
            "cohort_id": req.cohort_id,
            "protocol": protocol,
            "level": req.level,
            "n_test": int(test.shape[0]),
            "clean_accuracy": float(clean_acc),
            "perturbed_accuracy": float(pert_acc),
            "delta_acc": float(clean_acc - pert_acc),
        }

    @app.post("/validate")
    def validate(req: ValidateRequest):
        try:
            ds = _load_csv_text(req.csv_text, req.cohort_id)
            deduped, removed = deduplicate(ds)
            conflicts = label_conflict_count(ds)
            scores = [aq10_screen_score(row)[0] for row in ds.features]
            flags = [aq10_screen_score(row)[1] for row in ds.features]
        except DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        positives = int(ds.labels.sum())
        sources: dict[str, int] = {}
        if ds.source_tags:
            for tag in ds.source_tags:
                sources[tag] = sources.get(tag, 0) + 1
        screen_flags = sum(1 for f in flags if f)
        return {
            "cohort_id": ds.cohort_id,
            "rows": ds.n,
            "class_counts": {"positive": positives, "negative": ds.n - positives},
            "prevalence": positives / ds.n,
            "rows_after_dedup": deduped.n,
            "duplicates_removed": removed,
            "label_conflicts": conflicts,
            "screen_positive_rate": screen_flags / ds.n,
            "mean_screen_score": sum(scores) / len(scores),
            "screen_label_agreement": sum(
                1 for f, lbl in zip(flags, ds.labels) if int(f) == int(lbl)
            )
            / ds.n,
            "sources": dict(sorted(sources.items())),
        }

    return app
