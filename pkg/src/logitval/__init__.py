"""Optimism-corrected performance measures for small-sample logistic regression.

Three estimators (maximum likelihood, Firth's penalized likelihood, ridge
tuned by penalized AIC), three performance measures (c-statistic,
discrimination slope, Brier score) and six resampling schemes, plus a
simulation engine for comparing the resampled estimates with independent
validation.
"""

__version__ = "0.1.0"

from .dataset import Dataset
from .estimators import (
    EstimatorKind,
    EstimatorSpec,
    FittedModel,
    check_fittable,
    effective_df,
    fisher_components,
    fit,
    fit_batch,
    fit_firth,
    fit_ml,
    fit_ridge,
    fit_ridge_fixed,
    log_likelihood,
    penalized_log_likelihood,
    predict_probs,
)
from .exceptions import *  # noqa: F401,F403
from .fileio import ResultsRow, load_csv, read_report, write_report
from .metrics import (
    MetricKind,
    MetricValue,
    PredictionSet,
    brier_score,
    c_statistic,
    discrimination_slope,
    evaluate,
    winsorize_cstat,
)
from .resampling import (
    AssessmentResult,
    Dot632Trace,
    Method,
    ResamplePlan,
    apparent,
    assess,
    dot632plus,
    dot632plus_combine,
    enhanced_bootstrap,
    kfold_cv,
    loo_cv,
    lpo_cv,
    simple_bootstrap,
    subset_policy,
)
from .separation import Separation, detect_separation
from .simstudy import (
    PerformanceSummary,
    ScenarioConfig,
    all_scenarios,
    gen_covariates,
    gen_dataset,
    independent_validation,
    run_scenario,
    scenario_coefficients,
    summarize,
    winsorized_summary,
)
