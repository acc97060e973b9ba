"""End-to-end analysis driver.

Takes a column table, resolves classes and direction, splits subgroups,
estimates the cutpoint per subgroup, optionally validates by bootstrap,
and renders the combined result as text or a structured dict.  Rows with
a missing class or subgroup label are dropped up front; rows with a
missing predictor stay out of the estimation sample but are counted in
the per-class predictor summaries.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .bootstrap import (
    BootConfig,
    BootRepetition,
    BootSummary,
    run_bootstrap,
    summarize_bootstrap,
    summary_row,
)
from .errors import DataError, NumericError
from .estimators import CutpointResult, MethodSpec, estimate_cutpoint
from .metrics import MetricSpec, canonical_metric_id
from .roc import (
    Direction,
    Resolution,
    RocCurve,
    Sample,
    build_roc,
    detect_direction_and_classes,
)

__all__ = [
    "AnalysisRequest",
    "SubgroupRecord",
    "AnalysisResult",
    "run_analysis",
    "run_multi",
    "summary_data",
    "render_summary",
    "summarize_analysis",
]


@dataclass(frozen=True)
class AnalysisRequest:
    """One analysis to run against a column table.

    ``table`` maps column names to 1-d sequences of equal length.  An
    empty ``predictors`` tuple lets :func:`run_multi` pick every numeric
    column except the outcome and subgroup columns.  ``direction``
    accepts ">="/"<=" strings or :class:`Direction` values.
    """

    table: Mapping[str, Any]
    outcome: str
    predictors: tuple[str, ...] = ()
    subgroup: str | None = None
    pos_class: Any = None
    neg_class: Any = None
    direction: Direction | None = None
    per_subgroup_direction: bool = False
    method: MethodSpec = field(default_factory=MethodSpec)
    metric: MetricSpec = field(default_factory=MetricSpec)
    boot: BootConfig | None = None

    def __post_init__(self) -> None:
        preds = self.predictors
        if isinstance(preds, str):
            preds = (preds,)
        object.__setattr__(self, "predictors", tuple(preds))
        if self.direction is not None and not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction.parse(self.direction))
        if self.subgroup is not None and self.subgroup == self.outcome:
            raise DataError("subgroup column and outcome column must differ")


@dataclass(frozen=True, eq=False)
class SubgroupRecord:
    """Result cell for one subgroup (or the whole sample).

    ``error`` set means estimation was skipped for this cell; the
    predictor summaries are still filled in.
    """

    subgroup: Any
    resolution: Resolution | None
    result: CutpointResult | None
    curve: RocCurve | None
    predictor_stats: dict[str, dict[str, float]]
    boot_reps: tuple[BootRepetition, ...] = ()
    boot_summary: BootSummary | None = None
    error: str | None = None


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    """All record cells of one predictor plus run-level bookkeeping.

    ``dropped_rows`` counts rows lost to a missing outcome or subgroup
    label.  ``direction`` is None when each subgroup resolved its own.
    ``error`` is only set by :func:`run_multi` when a whole predictor
    failed; ``records`` is empty in that case.
    """

    predictor: str
    outcome: str
    subgroup_column: str | None
    records: tuple[SubgroupRecord, ...]
    dropped_rows: int
    method_id: str
    metric_name: str
    metric_spec: MetricSpec
    direction: Direction | None
    boot_runs: int
    error: str | None = None


# --- column handling --------------------------------------------------------


def _is_missing(value: Any) -> bool:
    if value is None:
        return True
    return isinstance(value, float) and math.isnan(value)


def _missing_mask(column: NDArray[Any]) -> NDArray[np.bool_]:
    if column.dtype.kind == "f":
        return np.isnan(column)
    if column.dtype.kind == "O":
        return np.array([_is_missing(v) for v in column], dtype=bool)
    return np.zeros(column.shape, dtype=bool)


def _column(table: Mapping[str, Any], name: str, length: int | None = None) -> NDArray[Any]:
    if name not in table:
        known = ", ".join(sorted(map(str, table)))
        raise DataError(f"column {name!r} not found; available: {known}")
    arr = np.asarray(table[name])
    if arr.ndim != 1:
        raise DataError(f"column {name!r} must be 1-d")
    if length is not None and arr.size != length:
        raise DataError(f"column {name!r} has {arr.size} rows, expected {length}")
    return arr


def _numeric_column(name: str, column: NDArray[Any]) -> NDArray[np.float64]:
    """Coerce to float64 with missing entries as NaN."""
    if column.dtype.kind in "fiu":
        return column.astype(np.float64)
    if column.dtype.kind == "O":
        out = np.empty(column.shape, dtype=np.float64)
        for i, value in enumerate(column):
            if _is_missing(value):
                out[i] = np.nan
            else:
                try:
                    out[i] = float(value)
                except (TypeError, ValueError):
                    raise DataError(
                        f"predictor column {name!r} is not numeric at row {i}: {value!r}"
                    ) from None
        return out
    try:
        return column.astype(np.float64)
    except (TypeError, ValueError):
        raise DataError(f"predictor column {name!r} is not numeric") from None


# --- resolution -------------------------------------------------------------


def _resolve(
    request: AnalysisRequest,
    x: NDArray[np.float64],
    labels: NDArray[Any],
    per_cell_direction: bool,
) -> Resolution:
    """Class/direction resolution on the pooled estimation rows.

    In per-subgroup-direction mode only the class pair is taken from
    this; an explicit direction hint still wins everywhere.
    """
    if per_cell_direction and (request.pos_class is not None or request.neg_class is not None):
        # Classes are pinned by hints; skip the pooled median comparison,
        # which may be ambiguous even when every subgroup is clear.
        return detect_direction_and_classes(
            x,
            labels,
            pos_class=request.pos_class,
            neg_class=request.neg_class,
            direction=Direction.GE,
        )
    return detect_direction_and_classes(
        x,
        labels,
        pos_class=request.pos_class,
        neg_class=request.neg_class,
        direction=request.direction,
    )


def _predictor_stats(
    x_with_nan: NDArray[np.float64], labels: NDArray[Any], resolution: Resolution
) -> dict[str, dict[str, float]]:
    stats = {"overall": summary_row(x_with_nan)}
    for cls in (resolution.neg_class, resolution.pos_class):
        mask = np.asarray(labels == cls, dtype=bool)
        stats[str(cls)] = summary_row(x_with_nan[mask])
    return stats


def _one_cell(
    label: Any,
    x: NDArray[np.float64],
    labels: NDArray[Any],
    stats: dict[str, dict[str, float]],
    request: AnalysisRequest,
    global_res: Resolution,
    stream_path: tuple[int, ...],
    per_cell_direction: bool,
) -> SubgroupRecord:
    if x.size == 0:
        raise DataError("no usable predictor values")
    resolution = global_res
    if per_cell_direction:
        resolution = detect_direction_and_classes(
            x,
            labels,
            pos_class=global_res.pos_class,
            neg_class=global_res.neg_class,
            direction=None,
        )
    y = np.asarray(labels == resolution.pos_class, dtype=bool)
    sample = Sample(x=x, y=y, pos_class=resolution.pos_class, neg_class=resolution.neg_class)
    result = estimate_cutpoint(
        sample, resolution.direction, request.metric, request.method, stream_path=stream_path
    )
    curve = build_roc(sample, resolution.direction)
    reps: tuple[BootRepetition, ...] = ()
    boot_summary = None
    if request.boot is not None and request.boot.boot_runs > 0:
        reps = run_bootstrap(
            sample,
            resolution.direction,
            request.metric,
            request.method,
            config=request.boot,
            stream_path=stream_path,
        )
        boot_summary = summarize_bootstrap(reps)
    return SubgroupRecord(
        subgroup=label,
        resolution=resolution,
        result=result,
        curve=curve,
        predictor_stats=stats,
        boot_reps=reps,
        boot_summary=boot_summary,
    )


def run_analysis(request: AnalysisRequest) -> AnalysisResult:
    """Run one predictor end to end.

    Direction and classes are resolved once on the pooled rows and
    inherited by every subgroup unless ``per_subgroup_direction`` asks
    for local direction detection.  A subgroup that cannot be analyzed
    (single class, no usable values) becomes an error record and the run
    continues; the run fails only when every subgroup failed.  Subgroup
    cells are processed in lexicographic label order, and cell ``i``
    prefixes all its resampling streams with ``i`` so equally sized
    subgroups never share draws.
    """
    if len(request.predictors) != 1:
        raise DataError("run_analysis takes exactly one predictor; use run_multi for several")
    predictor = request.predictors[0]
    if predictor == request.outcome or predictor == request.subgroup:
        raise DataError(f"predictor column {predictor!r} clashes with outcome/subgroup")
    metric_name = canonical_metric_id(request.metric.metric_id)

    outcome_col = _column(request.table, request.outcome)
    n_rows = outcome_col.size
    x_all = _numeric_column(predictor, _column(request.table, predictor, n_rows))
    sub_col = _column(request.table, request.subgroup, n_rows) if request.subgroup else None

    keep = ~_missing_mask(outcome_col)
    if sub_col is not None:
        keep &= ~_missing_mask(sub_col)
    dropped = int(n_rows - keep.sum())
    if not keep.any():
        raise DataError("no rows with known class labels")
    x = x_all[keep]
    labels = outcome_col[keep]
    groups = sub_col[keep] if sub_col is not None else None

    usable = ~np.isnan(x)
    if not usable.any():
        raise DataError(f"all predictor values missing in column {predictor!r}")
    per_cell_direction = (
        request.per_subgroup_direction and request.direction is None and groups is not None
    )
    global_res = _resolve(request, x[usable], labels[usable], per_cell_direction)

    if groups is None:
        cells: list[tuple[Any, NDArray[np.bool_]]] = [(None, np.ones(x.size, dtype=bool))]
    else:
        cells = [
            (g, np.asarray(groups == g, dtype=bool))
            for g in sorted(set(groups.tolist()), key=str)
        ]

    records: list[SubgroupRecord] = []
    for index, (label, mask) in enumerate(cells):
        x_cell_all = x[mask]
        labels_cell = labels[mask]
        stats = _predictor_stats(x_cell_all, labels_cell, global_res)
        cell_usable = ~np.isnan(x_cell_all)
        path = (index,) if groups is not None else ()
        try:
            record = _one_cell(
                label, x_cell_all[cell_usable], labels_cell[cell_usable],
                stats, request, global_res, path, per_cell_direction,
            )
        except (DataError, NumericError) as exc:
            if groups is None:
                raise
            record = SubgroupRecord(
                subgroup=label,
                resolution=None,
                result=None,
                curve=None,
                predictor_stats=stats,
                error=str(exc),
            )
        records.append(record)
    if all(r.error is not None for r in records):
        details = "; ".join(f"{r.subgroup}: {r.error}" for r in records)
        raise DataError(f"analysis failed for every subgroup: {details}")

    return AnalysisResult(
        predictor=predictor,
        outcome=request.outcome,
        subgroup_column=request.subgroup,
        records=tuple(records),
        dropped_rows=dropped,
        method_id=request.method.method_id,
        metric_name=metric_name,
        metric_spec=request.metric,
        direction=None if per_cell_direction else global_res.direction,
        boot_runs=request.boot.boot_runs if request.boot is not None else 0,
    )


def _auto_predictors(request: AnalysisRequest) -> tuple[str, ...]:
    reserved = {request.outcome, request.subgroup}
    names = [
        str(name)
        for name in request.table
        if name not in reserved and np.asarray(request.table[name]).dtype.kind in "fiu"
    ]
    return tuple(sorted(names))


def run_multi(request: AnalysisRequest) -> tuple[AnalysisResult, ...]:
    """Run one analysis per predictor; failures stay isolated per predictor.

    With no explicit predictors every numeric column except the outcome
    and subgroup columns is used, in lexicographic name order.  Explicit
    predictors keep their given order.  All predictors share the same
    seeds, so bootstrap draws are paired across predictors.
    """
    predictors = request.predictors or _auto_predictors(request)
    if not predictors:
        raise DataError("no eligible numeric predictor columns")
    results: list[AnalysisResult] = []
    for name in predictors:
        single = dataclasses.replace(request, predictors=(name,))
        try:
            results.append(run_analysis(single))
        except (DataError, NumericError) as exc:
            results.append(
                AnalysisResult(
                    predictor=name,
                    outcome=request.outcome,
                    subgroup_column=request.subgroup,
                    records=(),
                    dropped_rows=0,
                    method_id=request.method.method_id,
                    metric_name=request.metric.metric_id,
                    metric_spec=request.metric,
                    direction=None,
                    boot_runs=request.boot.boot_runs if request.boot is not None else 0,
                    error=str(exc),
                )
            )
    return tuple(results)


# --- summaries --------------------------------------------------------------

_STAT_COLUMNS = (
    ("min", "Min."),
    ("q05", "5%"),
    ("q25", "1st Qu."),
    ("median", "Median"),
    ("mean", "Mean"),
    ("q75", "3rd Qu."),
    ("q95", "95%"),
    ("max", "Max."),
    ("sd", "SD"),
    ("n_missing", "NAs"),
)


def summary_data(result: AnalysisResult) -> dict[str, Any]:
    """Structured form of the summary; the text form renders from this alone."""
    direction_text = "by subgroup" if result.direction is None else result.direction.symbol
    if result.error is not None:
        direction_text = "NA"
    header = {
        "method": result.method_id,
        "predictor": result.predictor,
        "outcome": result.outcome,
        "direction": direction_text,
        "subgroups": (
            [str(r.subgroup) for r in result.records] if result.subgroup_column else None
        ),
        "boot_runs": result.boot_runs if result.boot_runs > 0 else None,
        "error": result.error,
    }
    blocks: list[dict[str, Any]] = []
    for rec in result.records:
        block: dict[str, Any] = {
            "subgroup": None if rec.subgroup is None else str(rec.subgroup),
            "predictor_summary": rec.predictor_stats,
        }
        if rec.error is not None:
            block["error"] = rec.error
            blocks.append(block)
            continue
        est = rec.result
        block["direction"] = rec.resolution.direction.symbol
        block["auc_row"] = {
            "auc": est.auc,
            "n": est.n,
            "n_pos": est.n_pos,
            "n_neg": est.n_neg,
        }
        panel = est.roc_metric_panel
        block["panel"] = {
            "optimal_cutpoint": est.optimal_cutpoint,
            "metric_name": est.method_metric_name,
            "metric_value": est.method_metric_value,
            "acc": panel["accuracy"],
            "sensitivity": panel["sensitivity"],
            "specificity": panel["specificity"],
            "tp": panel["tp"],
            "fn": panel["fn"],
            "fp": panel["fp"],
            "tn": panel["tn"],
        }
        if rec.boot_summary is not None:
            block["bootstrap_summary"] = {
                "rows": rec.boot_summary.rows,
                "boot_runs": rec.boot_summary.boot_runs,
                "failed": rec.boot_summary.failed,
            }
        blocks.append(block)
    return {"header": header, "blocks": blocks}


def _fmt4(value: float) -> str:
    if math.isnan(value):
        return "NA"
    return f"{value:.4f}"


def _fmt_cutpoint(value: float) -> str:
    if math.isnan(value):
        return "NA"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    if value == int(value):
        return str(int(value))
    return f"{value:.4f}".rstrip("0").rstrip(".")


def _fmt_stat(value: float) -> str:
    if math.isnan(value):
        return "NA"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]], left_first: bool = False) -> list[str]:
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) for i in range(len(headers))
    ]
    lines = []
    for r, row in enumerate([list(headers), *[list(r) for r in rows]]):
        cells = []
        for i, cell in enumerate(row):
            if left_first and i == 0:
                cells.append(cell.ljust(widths[i]))
            else:
                cells.append(cell.rjust(widths[i]))
        lines.append(" ".join(cells).rstrip())
    return lines


def _stats_rows(stats: Mapping[str, Mapping[str, float]]) -> list[list[str]]:
    return [
        [str(name), *(_fmt_stat(row[key]) for key, _ in _STAT_COLUMNS)]
        for name, row in stats.items()
    ]


def render_summary(data: Mapping[str, Any]) -> str:
    """Text form of :func:`summary_data`; uses only values present in it."""
    h = data["header"]
    lines = [
        f"Method: {h['method']}",
        f"Predictor: {h['predictor']}",
        f"Outcome: {h['outcome']}",
        f"Direction: {h['direction']}",
    ]
    if h["subgroups"] is not None:
        lines.append("Subgroups: " + ", ".join(h["subgroups"]))
    if h["boot_runs"] is not None:
        lines.append(f"Nr. of bootstraps: {h['boot_runs']}")
    if h.get("error") is not None:
        lines.append("")
        lines.append(f"Error: {h['error']}")
        return "\n".join(lines) + "\n"
    for block in data["blocks"]:
        lines.append("")
        if block["subgroup"] is not None:
            lines.append(f"Subgroup: {block['subgroup']}")
            lines.append("-" * 38)
        if block.get("error") is not None:
            lines.append(f"Error: {block['error']}")
            lines.append("")
            lines.append("Predictor summary:")
            stat_headers = ["", *(label for _, label in _STAT_COLUMNS)]
            lines.extend(_table(stat_headers, _stats_rows(block["predictor_summary"]), left_first=True))
            continue
        if h["direction"] == "by subgroup":
            lines.append(f"Direction: {block['direction']}")
            lines.append("")
        auc_row = block["auc_row"]
        lines.extend(
            _table(
                ["AUC", "n", "n_pos", "n_neg"],
                [[
                    _fmt4(auc_row["auc"]),
                    str(auc_row["n"]),
                    str(auc_row["n_pos"]),
                    str(auc_row["n_neg"]),
                ]],
            )
        )
        lines.append("")
        panel = block["panel"]
        lines.extend(
            _table(
                [
                    "optimal_cutpoint",
                    panel["metric_name"],
                    "acc",
                    "sensitivity",
                    "specificity",
                    "tp",
                    "fn",
                    "fp",
                    "tn",
                ],
                [[
                    _fmt_cutpoint(panel["optimal_cutpoint"]),
                    _fmt4(panel["metric_value"]),
                    _fmt4(panel["acc"]),
                    _fmt4(panel["sensitivity"]),
                    _fmt4(panel["specificity"]),
                    str(panel["tp"]),
                    str(panel["fn"]),
                    str(panel["fp"]),
                    str(panel["tn"]),
                ]],
            )
        )
        lines.append("")
        lines.append("Predictor summary:")
        stat_headers = ["", *(label for _, label in _STAT_COLUMNS)]
        lines.extend(_table(stat_headers, _stats_rows(block["predictor_summary"]), left_first=True))
        boot = block.get("bootstrap_summary")
        if boot is not None:
            lines.append("")
            lines.append("Bootstrap summary:")
            lines.extend(
                _table(
                    ["Variable", *(label for _, label in _STAT_COLUMNS)],
                    _stats_rows(boot["rows"]),
                )
            )
            if boot["failed"]:
                lines.append(f"Failed repetitions: {boot['failed']}")
    return "\n".join(lines) + "\n"


def summarize_analysis(result: AnalysisResult) -> str:
    """Render the result the way :func:`summary_data` structures it."""
    return render_summary(summary_data(result))
