"""Optimal cutpoint estimation, bootstrap validation, and method comparison.

The usual entry points are :func:`run_analysis` for one predictor against a
column table, :func:`run_multi` for several, and the ``optcut`` command line
on CSV files.  The estimator, metric, and curve layers underneath are public
too, for callers that want single pieces.
"""

from optcut.bootstrap import (
    BootConfig,
    BootRepetition,
    BootSummary,
    boot_ci,
    cutpoint_distribution,
    run_bootstrap,
    summarize_bootstrap,
)
from optcut.cli import (
    CliConfig,
    emit_csv,
    emit_json,
    emit_text,
    export_plot_data,
    ingest_csv,
    main,
    run_config,
)
from optcut.errors import DataError, NumericError, OptcutError
from optcut.estimators import (
    METHOD_IDS,
    CutpointResult,
    MethodSpec,
    Selection,
    estimate_boot_cut,
    estimate_cutpoint,
    estimate_empirical,
    estimate_kernel,
    estimate_normal,
    estimate_smoothed,
    select_from_values,
    smooth_and_select,
)
from optcut.metrics import (
    MAXIMIZE,
    MINIMIZE,
    MetricSpec,
    MetricVector,
    available_metrics,
    best_cutpoint_indices,
    canonical_metric_id,
    evaluate_metric,
    evaluate_metric_at,
    metric_sense,
    standard_metric_panel,
)
from optcut.pipeline import (
    AnalysisRequest,
    AnalysisResult,
    SubgroupRecord,
    run_analysis,
    run_multi,
    summarize_analysis,
)
from optcut.roc import (
    ConfusionCounts,
    Direction,
    Resolution,
    RocCurve,
    Sample,
    auc,
    build_roc,
    classify_counts,
    detect_direction_and_classes,
    midpoint_cutpoint,
)
from optcut.simlab import (
    DEFAULT_METHODS,
    FAMILIES,
    LEVELS,
    SimResult,
    SimScenario,
    make_scenario,
    run_benchmark,
    run_simulation,
    scaling_slope,
    scenario_grid,
    true_optimal_cutpoint,
)
from optcut.smoothers import (
    fit_loess_aicc,
    fit_penalized_spline_gcv,
    fit_smoothing_spline,
    kernel_cdf,
    rule_of_thumb_bandwidth,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisRequest",
    "AnalysisResult",
    "BootConfig",
    "BootRepetition",
    "BootSummary",
    "CliConfig",
    "ConfusionCounts",
    "CutpointResult",
    "DEFAULT_METHODS",
    "DataError",
    "Direction",
    "FAMILIES",
    "LEVELS",
    "MAXIMIZE",
    "METHOD_IDS",
    "MINIMIZE",
    "MethodSpec",
    "MetricSpec",
    "MetricVector",
    "NumericError",
    "OptcutError",
    "Resolution",
    "RocCurve",
    "Sample",
    "Selection",
    "SimResult",
    "SimScenario",
    "SubgroupRecord",
    "auc",
    "available_metrics",
    "best_cutpoint_indices",
    "boot_ci",
    "build_roc",
    "canonical_metric_id",
    "classify_counts",
    "cutpoint_distribution",
    "detect_direction_and_classes",
    "emit_csv",
    "emit_json",
    "emit_text",
    "estimate_boot_cut",
    "estimate_cutpoint",
    "estimate_empirical",
    "estimate_kernel",
    "estimate_normal",
    "estimate_smoothed",
    "evaluate_metric",
    "evaluate_metric_at",
    "export_plot_data",
    "fit_loess_aicc",
    "fit_penalized_spline_gcv",
    "fit_smoothing_spline",
    "ingest_csv",
    "kernel_cdf",
    "main",
    "make_scenario",
    "metric_sense",
    "midpoint_cutpoint",
    "rule_of_thumb_bandwidth",
    "run_analysis",
    "run_benchmark",
    "run_bootstrap",
    "run_config",
    "run_multi",
    "run_simulation",
    "scaling_slope",
    "scenario_grid",
    "select_from_values",
    "smooth_and_select",
    "standard_metric_panel",
    "summarize_analysis",
    "summarize_bootstrap",
    "true_optimal_cutpoint",
    "__version__",
]
