"""Four-axis benchmark for questionnaire-based screening classifiers:
performance, calibration, interpretability, and perturbation robustness,
aggregated with a variance-penalized cost and served over CLI + HTTP."""

__version__ = "0.1.0"

from .hap import (
    DEFAULT_RATIO_GRID,
    HapResult,
    PenaltyWeights,
    SensitivityResult,
    SnrCurve,
    crossover_lambda,
    fit_snr_curve,
    fold_cost,
    hap_score,
    kendall_w,
    sensitivity_sweep,
    separation,
    snr,
)
from .ingest import (
    COHORT_IDS,
    CohortDataset,
    DataError,
    FoldPlan,
    aq10_screen_score,
    deduplicate,
    load_csv,
    make_fold_plan,
)
from .interpret import ConsensusReport, ImportanceVector, consensus, permutation_importance
from .metrics import (
    CalibrationReport,
    ConfusionMatrix,
    PerfMetrics,
    ProbPrediction,
    auc_roc,
    basic_metrics,
    brier,
    calibration_report,
    confusion,
    ece,
)
from .modelhost import ModelError, ModelHandle, ModelSpec, ProtocolError, fit, predict_proba, shutdown
from .pipeline import (
    BenchReport,
    EvalRecord,
    PipelineError,
    RunConfig,
    build_scorecard,
    emit_reports,
    recommend,
    run_benchmark,
)
from .robustness import (
    RobustnessReport,
    evaluate_robustness,
    perturb_flip,
    perturb_gaussian,
    perturb_removal,
    robustness_band,
)

__all__ = [name for name in dir() if not name.startswith("_")]
