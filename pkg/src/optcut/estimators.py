"""Cutpoint estimation methods.

Each method turns a sample (or its ROC curve) plus a metric choice into a
:class:`CutpointResult`.  Whatever a method optimizes internally, the
reported metric panel always comes from classifying the full sample on the
unsmoothed curve at the final cutpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr

from ._rng import substream
from .errors import NumericError
from .metrics import (
    MAXIMIZE,
    MetricSpec,
    best_cutpoint_indices,
    canonical_metric_id,
    evaluate_metric,
    evaluate_metric_at,
    metric_sense,
    standard_metric_panel,
)
from .roc import Direction, RocCurve, Sample, auc, build_roc, midpoint_adjust
from .smoothers import (
    fit_loess_aicc,
    fit_penalized_spline_gcv,
    fit_smoothing_spline,
    kernel_cdf,
    rule_of_thumb_bandwidth,
)

SMOOTHED_METHODS = ("gam_smooth", "spline_smooth", "loess_smooth")
BASELINE_METHODS = ("mean", "median", "manual")
METHOD_IDS = (
    "empirical",
    "boot_cut",
    *SMOOTHED_METHODS,
    "normal_youden",
    "kernel_youden",
    *BASELINE_METHODS,
)
TIE_BREAKS = ("all", "median", "mean")
SUMMARY_FNS = ("mean", "median")

_SMOOTHER_PREFIX = {"gam_smooth": "gam", "spline_smooth": "spline", "loess_smooth": "loess"}
_MAX_REDRAWS = 100
_KERNEL_GRID_POINTS = 512
_EQUAL_VARIANCE_RTOL = 1e-8


@dataclass(frozen=True)
class MethodSpec:
    """Method choice plus its tuning knobs.

    ``tie_break`` and ``use_midpoints`` apply to the methods that pick from
    the observed candidate set (empirical, the smoothed family, and the
    per-resample searches inside boot_cut).  The remaining fields belong to
    individual methods and are ignored elsewhere.
    """

    method_id: str = "empirical"
    boot_cut_count: int = 50
    summary_fn: str = "mean"
    manual_cutpoint: float | None = None
    tie_break: str = "median"
    use_midpoints: bool = False
    seed: int | None = None
    spline_smoothing: float = 1.0
    gam_basis_dim: int = 10
    loess_degree: int = 1

    def __post_init__(self) -> None:
        if self.method_id not in METHOD_IDS:
            raise ValueError(f"unknown method {self.method_id!r}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"unknown tie_break {self.tie_break!r}")
        if self.summary_fn not in SUMMARY_FNS:
            raise ValueError(f"unknown summary_fn {self.summary_fn!r}")
        if self.boot_cut_count < 2:
            raise ValueError("boot_cut_count must be at least 2")
        if self.method_id == "manual":
            if self.manual_cutpoint is None:
                raise ValueError("manual method needs manual_cutpoint")
            if not np.isfinite(self.manual_cutpoint):
                raise ValueError("manual_cutpoint must be finite")


@dataclass(frozen=True)
class CutpointResult:
    """One method's cutpoint plus the panel read off the unsmoothed curve."""

    method_id: str
    optimal_cutpoint: float
    tied_cutpoints: tuple[float, ...]
    method_metric_name: str
    method_metric_value: float
    roc_metric_panel: dict[str, float]
    auc: float
    prevalence: float
    direction: Direction
    n: int
    n_pos: int
    n_neg: int
    pos_class: object = None
    neg_class: object = None
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Selection:
    """Outcome of picking an optimum from candidate cutpoints."""

    chosen: float
    tied: tuple[float, ...]
    value: float
    meta: dict = field(default_factory=dict)


def select_from_values(
    cutpoints: NDArray[np.float64],
    values: NDArray[np.float64],
    sense: str,
    tie_break: str = "median",
) -> Selection:
    """Pick the best candidate; resolve ties per ``tie_break``.

    ``median`` (and ``all``, which only changes how callers read the tied
    set) takes the lower middle of the sorted tied cutpoints so the result
    stays an observed value; ``mean`` averages them.
    """
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    cutpoints = np.asarray(cutpoints, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    idx = best_cutpoint_indices(values, sense)
    tied = np.sort(cutpoints[idx])
    if tie_break == "mean":
        chosen = float(tied.mean())
    else:
        chosen = float(tied[(tied.size - 1) // 2])
    return Selection(
        chosen=chosen,
        tied=tuple(float(t) for t in tied),
        value=float(values[idx[0]]),
    )


def smooth_and_select(
    cutpoints: NDArray[np.float64],
    values: NDArray[np.float64],
    smoother_id: str,
    sense: str = MAXIMIZE,
    tie_break: str = "median",
    *,
    spline_smoothing: float = 1.0,
    gam_basis_dim: int = 10,
    loess_degree: int = 1,
) -> Selection:
    """Fit a smoother to (cutpoint, value) pairs and pick the fitted optimum.

    Candidates are the smoother's fit sites: the distinct cutpoints whose
    raw value was finite.  ``value`` in the returned selection is the
    fitted, not the raw, optimum.
    """
    try:
        if smoother_id == "gam_smooth":
            fit = fit_penalized_spline_gcv(cutpoints, values, basis_dim=gam_basis_dim)
            meta = {"lam": fit.lam, "gcv": fit.gcv, "edf": fit.edf}
        elif smoother_id == "spline_smooth":
            fit = fit_smoothing_spline(cutpoints, values, smoothing=spline_smoothing)
            meta = {"lam": fit.lam}
        elif smoother_id == "loess_smooth":
            fit = fit_loess_aicc(cutpoints, values, degree=loess_degree)
            meta = {"span": fit.span, "degree": fit.degree}
        else:
            raise ValueError(f"unknown smoother {smoother_id!r}")
    except NumericError as exc:
        raise NumericError(f"{smoother_id}: {exc}") from exc
    sel = select_from_values(fit.x_fit, fit.fitted, sense, tie_break)
    return replace(sel, meta=meta)


def _maybe_midpoint(chosen: float, curve: RocCurve, use_midpoints: bool) -> float:
    """Apply the midpoint shift when the cutpoint is an observed value."""
    if not use_midpoints or not np.isfinite(chosen):
        return chosen
    uniq = np.sort(curve.cutpoints[1:])
    i = int(np.searchsorted(uniq, chosen))
    if i >= uniq.size or uniq[i] != chosen:
        return chosen
    return midpoint_adjust(chosen, uniq, curve.direction)


def _finish(
    curve: RocCurve,
    method_id: str,
    cutpoint: float,
    tied: tuple[float, ...],
    metric_name: str,
    metric_value: float,
    details: dict,
) -> CutpointResult:
    counts = curve.counts_at(curve.threshold_index(float(cutpoint)))
    return CutpointResult(
        method_id=method_id,
        optimal_cutpoint=float(cutpoint),
        tied_cutpoints=tied,
        method_metric_name=metric_name,
        method_metric_value=float(metric_value),
        roc_metric_panel=standard_metric_panel(counts),
        auc=auc(curve),
        prevalence=curve.n_pos / curve.n,
        direction=curve.direction,
        n=curve.n,
        n_pos=curve.n_pos,
        n_neg=curve.n_neg,
        details=details,
    )


def _stamp_classes(result: CutpointResult, sample: Sample) -> CutpointResult:
    return replace(result, pos_class=sample.pos_class, neg_class=sample.neg_class)


def estimate_empirical(
    curve: RocCurve,
    metric: MetricSpec,
    *,
    tie_break: str = "median",
    use_midpoints: bool = False,
) -> CutpointResult:
    """Exhaustive in-sample search over the curve's cutpoints."""
    vec = evaluate_metric(metric, curve)
    sel = select_from_values(curve.cutpoints, vec.values, metric_sense(metric), tie_break)
    chosen = _maybe_midpoint(sel.chosen, curve, use_midpoints)
    return _finish(
        curve,
        "empirical",
        chosen,
        sel.tied,
        vec.metric_name,
        sel.value,
        {"tie_break": tie_break},
    )


def estimate_smoothed(
    curve: RocCurve,
    metric: MetricSpec,
    smoother_id: str,
    *,
    tie_break: str = "median",
    use_midpoints: bool = False,
    spline_smoothing: float = 1.0,
    gam_basis_dim: int = 10,
    loess_degree: int = 1,
) -> CutpointResult:
    """Smooth metric-vs-cutpoint, then pick the fitted optimum.

    The sentinel point is excluded from the fit.  The reported metric value
    is the smoothed optimum, under a name prefixed with the smoother; the
    panel still comes from the unsmoothed curve.
    """
    if smoother_id not in SMOOTHED_METHODS:
        raise ValueError(f"unknown smoother {smoother_id!r}")
    vec = evaluate_metric(metric, curve)
    sel = smooth_and_select(
        curve.cutpoints[1:],
        vec.values[1:],
        smoother_id,
        metric_sense(metric),
        tie_break,
        spline_smoothing=spline_smoothing,
        gam_basis_dim=gam_basis_dim,
        loess_degree=loess_degree,
    )
    chosen = _maybe_midpoint(sel.chosen, curve, use_midpoints)
    return _finish(
        curve,
        smoother_id,
        chosen,
        sel.tied,
        f"{_SMOOTHER_PREFIX[smoother_id]}_{vec.metric_name}",
        sel.value,
        {"tie_break": tie_break, **sel.meta},
    )


def estimate_boot_cut(
    sample: Sample,
    direction: Direction,
    metric: MetricSpec,
    *,
    boot_cut_count: int = 50,
    summary_fn: str = "mean",
    seed: int | None = None,
    stream_path: tuple[int, ...] = (),
    tie_break: str = "median",
    use_midpoints: bool = False,
) -> CutpointResult:
    """Summarize per-resample empirical cutpoints over bootstrap resamples.

    Each resample slot owns a seed-derived random stream, so results do not
    depend on evaluation order.  A resample missing a class is redrawn from
    the slot's stream, up to ``_MAX_REDRAWS`` times.  The summarized
    cutpoint is usually unobserved; the panel locates it on the full-sample
    curve.
    """
    if boot_cut_count < 2:
        raise ValueError("boot_cut_count must be at least 2")
    if summary_fn not in SUMMARY_FNS:
        raise ValueError(f"unknown summary_fn {summary_fn!r}")
    summarize = np.mean if summary_fn == "mean" else np.median
    if seed is None:
        seed = int(np.random.SeedSequence().entropy)
    sense = metric_sense(metric)
    metric_name = canonical_metric_id(metric.metric_id)
    n = sample.n
    cuts = np.empty(boot_cut_count, dtype=np.float64)
    vals = np.empty(boot_cut_count, dtype=np.float64)
    redraws = np.zeros(boot_cut_count, dtype=np.int64)
    for slot in range(boot_cut_count):
        gen = substream(seed, *stream_path, slot)
        for _ in range(_MAX_REDRAWS + 1):
            indices = gen.integers(0, n, size=n)
            picked = sample.y[indices]
            if picked.any() and not picked.all():
                break
            redraws[slot] += 1
        else:
            raise NumericError(
                f"boot_cut resample still missing a class after {_MAX_REDRAWS} redraws"
            )
        sub_curve = build_roc(sample.take(indices), direction)
        vec = evaluate_metric(metric, sub_curve)
        sel = select_from_values(sub_curve.cutpoints, vec.values, sense, tie_break)
        cuts[slot] = _maybe_midpoint(sel.chosen, sub_curve, use_midpoints)
        vals[slot] = sel.value
    aggregate = float(summarize(cuts))
    curve = build_roc(sample, direction)
    result = _finish(
        curve,
        "boot_cut",
        aggregate,
        (aggregate,),
        metric_name,
        float(summarize(vals)),
        {
            "seed": seed,
            "summary_fn": summary_fn,
            "resample_cutpoints": cuts,
            "resample_metric_values": vals,
            "redraws": redraws,
        },
    )
    return _stamp_classes(result, sample)


def estimate_normal(sample: Sample, direction: Direction) -> CutpointResult:
    """Closed-form cutpoint under per-class normal models.

    Sample moments are plugged into the unequal-variance crossing formula.
    Near-equal variances fall back to the midpoint of the class means; the
    root whose cutpoint lies between the class means is preferred.
    """
    moments = []
    for values, label in ((sample.x_neg, "negative"), (sample.x_pos, "positive")):
        if values.size < 2:
            raise NumericError(f"normal_youden needs at least two {label}-class values")
        sd = float(np.std(values, ddof=1))
        if sd == 0.0:
            raise NumericError(f"normal_youden: zero variance in the {label} class")
        moments.append((float(np.mean(values)), sd))
    (mu_n, sd_n), (mu_p, sd_p) = moments
    var_n, var_p = sd_n**2, sd_p**2
    if abs(var_n - var_p) < _EQUAL_VARIANCE_RTOL * max(var_n, var_p):
        cut = (mu_n + mu_p) / 2.0
        variant = "midpoint"
    else:
        root = sd_n * sd_p * np.sqrt(
            (mu_n - mu_p) ** 2 + (var_n - var_p) * np.log(var_n / var_p)
        )
        cut = ((mu_p * var_n - mu_n * var_p) - root) / (var_n - var_p)
        variant = "minus_root"
        if not min(mu_n, mu_p) <= cut <= max(mu_n, mu_p):
            cut = ((mu_p * var_n - mu_n * var_p) + root) / (var_n - var_p)
            variant = "plus_root"
    spread = ndtr((cut - mu_n) / sd_n) - ndtr((cut - mu_p) / sd_p)
    value = float(spread if direction is Direction.GE else -spread)
    curve = build_roc(sample, direction)
    result = _finish(
        curve,
        "normal_youden",
        cut,
        (float(cut),),
        "normal_youden",
        value,
        {
            "mu_neg": mu_n,
            "sd_neg": sd_n,
            "mu_pos": mu_p,
            "sd_pos": sd_p,
            "variant": variant,
        },
    )
    return _stamp_classes(result, sample)


def estimate_kernel(sample: Sample, direction: Direction) -> CutpointResult:
    """Maximize the gap between Gaussian-kernel class CDFs on a fixed grid."""
    try:
        h_neg = rule_of_thumb_bandwidth(sample.x_neg)
        h_pos = rule_of_thumb_bandwidth(sample.x_pos)
    except NumericError as exc:
        raise NumericError(f"kernel_youden: {exc}") from exc
    cdf_neg = kernel_cdf(sample.x_neg, h_neg)
    cdf_pos = kernel_cdf(sample.x_pos, h_pos)
    margin = max(h_neg, h_pos)
    grid = np.linspace(
        float(sample.x.min()) - margin,
        float(sample.x.max()) + margin,
        _KERNEL_GRID_POINTS,
    )
    gap = cdf_neg(grid) - cdf_pos(grid)
    if direction is Direction.LE:
        gap = -gap
    best = int(np.argmax(gap))
    curve = build_roc(sample, direction)
    result = _finish(
        curve,
        "kernel_youden",
        float(grid[best]),
        (float(grid[best]),),
        "kernel_youden",
        float(gap[best]),
        {
            "bandwidth_neg": h_neg,
            "bandwidth_pos": h_pos,
            "grid_points": _KERNEL_GRID_POINTS,
        },
    )
    return _stamp_classes(result, sample)


def estimate_baseline(
    sample: Sample,
    direction: Direction,
    method_id: str,
    metric: MetricSpec | None = None,
    manual_cutpoint: float | None = None,
) -> CutpointResult:
    """Mean, median, or a fixed cutpoint; no optimization involved.

    The requested metric is still evaluated at the resulting cutpoint so
    baselines stay comparable with the optimizing methods.
    """
    if method_id not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method_id!r}")
    if method_id == "mean":
        cut = float(np.mean(sample.x))
    elif method_id == "median":
        cut = float(np.median(sample.x))
    else:
        if manual_cutpoint is None:
            raise ValueError("manual method needs manual_cutpoint")
        cut = float(manual_cutpoint)
        if not np.isfinite(cut):
            raise ValueError("manual_cutpoint must be finite")
    metric = metric if metric is not None else MetricSpec()
    curve = build_roc(sample, direction)
    counts = curve.counts_at(curve.threshold_index(cut))
    result = _finish(
        curve,
        method_id,
        cut,
        (cut,),
        canonical_metric_id(metric.metric_id),
        evaluate_metric_at(metric, counts),
        {},
    )
    return _stamp_classes(result, sample)


def estimate_cutpoint(
    sample: Sample,
    direction: Direction,
    metric: MetricSpec | None = None,
    method: MethodSpec | None = None,
    stream_path: tuple[int, ...] = (),
) -> CutpointResult:
    """Dispatch to the method named by ``method.method_id``.

    ``stream_path`` only affects ``boot_cut``; it keeps resampling streams
    disjoint when several fits run under one seed.
    """
    metric = metric if metric is not None else MetricSpec()
    method = method if method is not None else MethodSpec()
    mid = method.method_id
    if mid == "empirical":
        curve = build_roc(sample, direction)
        result = estimate_empirical(
            curve, metric, tie_break=method.tie_break, use_midpoints=method.use_midpoints
        )
    elif mid in SMOOTHED_METHODS:
        curve = build_roc(sample, direction)
        result = estimate_smoothed(
            curve,
            metric,
            mid,
            tie_break=method.tie_break,
            use_midpoints=method.use_midpoints,
            spline_smoothing=method.spline_smoothing,
            gam_basis_dim=method.gam_basis_dim,
            loess_degree=method.loess_degree,
        )
    elif mid == "boot_cut":
        result = estimate_boot_cut(
            sample,
            direction,
            metric,
            boot_cut_count=method.boot_cut_count,
            summary_fn=method.summary_fn,
            seed=method.seed,
            stream_path=stream_path,
            tie_break=method.tie_break,
            use_midpoints=method.use_midpoints,
        )
    elif mid == "normal_youden":
        result = estimate_normal(sample, direction)
    elif mid == "kernel_youden":
        result = estimate_kernel(sample, direction)
    else:
        result = estimate_baseline(sample, direction, mid, metric, method.manual_cutpoint)
    return _stamp_classes(result, sample)
