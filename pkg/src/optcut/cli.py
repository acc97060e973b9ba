"""Batch front end: CSV in, cutpoint analyses out.

Three subcommands.  ``analyze`` ingests a CSV table, runs the estimation
pipeline, and emits the result as a text summary, JSON, or flat CSV,
optionally exporting plot-ready data files.  ``simlab run`` sweeps the
simulation grid and ``simlab bench`` times the core paths.

Exit codes: 0 on success, 2 for usage problems, 3 for data problems,
4 for numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

import numpy as np

from .bootstrap import BootConfig
from .errors import DataError, NumericError
from .estimators import METHOD_IDS, SUMMARY_FNS, TIE_BREAKS, MethodSpec
from .metrics import MetricSpec, canonical_metric_id, evaluate_metric
from .pipeline import (
    AnalysisRequest,
    AnalysisResult,
    SubgroupRecord,
    run_analysis,
    run_multi,
    summarize_analysis,
)
from .roc import Direction
from . import simlab

__all__ = [
    "CliConfig",
    "PlotDataBundle",
    "ingest_csv",
    "result_payload",
    "emit_json",
    "emit_csv",
    "emit_text",
    "export_plot_data",
    "load_result_schema",
    "build_parser",
    "main",
]

SCHEMA_VERSION = 1

# Tokens treated as missing in every column.
_MISSING_TOKENS = frozenset({"", "NA"})

_WORKERS_ENV = "OPTCUT_WORKERS"

# Heavy-tailed predictors can blow the auto bin rule up into hundreds of
# thousands of bins; a plot never needs more than this many.
_MAX_HISTOGRAM_BINS = 512


# --- ingestion --------------------------------------------------------------


def ingest_csv(
    source: str | Path | TextIO,
    outcome: str,
    predictors: Sequence[str] = (),
    subgroup: str | None = None,
) -> dict[str, np.ndarray]:
    """Read a CSV table into column arrays ready for :class:`AnalysisRequest`.

    The first row must be a header with unique names.  Empty fields and the
    token ``NA`` count as missing: ``None`` in the outcome and subgroup
    columns, NaN elsewhere.  Every other column is converted to floats when
    all its values allow it; a requested predictor that does not convert is
    an error naming the offending row, while an unrequested column falls
    back to strings so automatic predictor detection skips it.  The outcome
    column must carry exactly two distinct non-missing values.
    """
    if hasattr(source, "read"):
        raw_rows = list(csv.reader(source))
    else:
        with open(source, newline="", encoding="utf-8-sig") as handle:
            raw_rows = list(csv.reader(handle))
    if not raw_rows:
        raise DataError("empty input: no header row")
    header = raw_rows[0]
    if len(set(header)) != len(header):
        dupes = sorted({name for name in header if header.count(name) > 1})
        raise DataError(f"duplicate column names in header: {', '.join(dupes)}")
    body = raw_rows[1:]
    for index, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(
                f"row {index}: expected {len(header)} fields, got {len(row)}"
            )
    wanted = [outcome, *predictors]
    if subgroup is not None:
        wanted.append(subgroup)
    for name in wanted:
        if name not in header:
            raise DataError(
                f"column {name!r} not found; available: {', '.join(header)}"
            )

    requested = set(predictors)
    label_columns = {outcome, subgroup} if subgroup is not None else {outcome}
    table: dict[str, np.ndarray] = {}
    for position, name in enumerate(header):
        tokens = [row[position] for row in body]
        if name in label_columns:
            table[name] = np.array(
                [None if tok in _MISSING_TOKENS else tok for tok in tokens],
                dtype=object,
            )
            continue
        table[name] = _numeric_or_text(name, tokens, strict=name in requested)

    present = [value for value in table[outcome] if value is not None]
    distinct = sorted(set(present))
    if len(distinct) != 2:
        shown = ", ".join(repr(value) for value in distinct[:6])
        raise DataError(
            f"class column {outcome!r} must have exactly two distinct "
            f"non-missing values, found {len(distinct)}: [{shown}]"
        )
    return table


def _numeric_or_text(name: str, tokens: list[str], strict: bool) -> np.ndarray:
    values = np.empty(len(tokens), dtype=np.float64)
    for index, token in enumerate(tokens):
        if token in _MISSING_TOKENS:
            values[index] = np.nan
            continue
        try:
            values[index] = float(token)
        except ValueError:
            if strict:
                raise DataError(
                    f"column {name!r}, row {index + 2}: "
                    f"{token!r} is not numeric"
                ) from None
            return np.array(
                [None if tok in _MISSING_TOKENS else tok for tok in tokens],
                dtype=object,
            )
    return values


# --- serialization ----------------------------------------------------------


def _json_scalar(value: Any) -> Any:
    """Make a value JSON-safe: NaN becomes null, infinities become strings."""
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        out = float(value)
        if math.isnan(out):
            return None
        if math.isinf(out):
            return "Infinity" if out > 0 else "-Infinity"
        return out
    if isinstance(value, str):
        return value
    return str(value)


def _stats_object(stats: dict[str, dict[str, float]]) -> dict[str, dict[str, Any]]:
    return {
        str(key): {name: _json_scalar(val) for name, val in row.items()}
        for key, row in stats.items()
    }


def _record_object(record: SubgroupRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "subgroup": _json_scalar(record.subgroup),
        "error": record.error,
        "predictor_summary": _stats_object(record.predictor_stats),
    }
    if record.error is not None:
        return obj
    estimate = record.result
    obj["direction"] = record.resolution.direction.symbol
    obj["pos_class"] = _json_scalar(record.resolution.pos_class)
    obj["neg_class"] = _json_scalar(record.resolution.neg_class)
    obj["optimal_cutpoint"] = _json_scalar(estimate.optimal_cutpoint)
    obj["tied_cutpoints"] = [_json_scalar(c) for c in estimate.tied_cutpoints]
    obj["metric_name"] = estimate.method_metric_name
    obj["metric_value"] = _json_scalar(estimate.method_metric_value)
    obj["auc"] = _json_scalar(estimate.auc)
    obj["prevalence"] = _json_scalar(estimate.prevalence)
    obj["n"] = estimate.n
    obj["n_pos"] = estimate.n_pos
    obj["n_neg"] = estimate.n_neg
    obj["panel"] = {
        name: _json_scalar(val) for name, val in estimate.roc_metric_panel.items()
    }
    if record.boot_summary is None:
        obj["bootstrap"] = None
    else:
        obj["bootstrap"] = {
            "boot_runs": record.boot_summary.boot_runs,
            "failed": record.boot_summary.failed,
            "rows": _stats_object(record.boot_summary.rows),
        }
    return obj


def result_payload(results: Sequence[AnalysisResult]) -> dict[str, Any]:
    """Versioned JSON-safe payload for one or more analyses."""
    analyses = []
    for res in results:
        analyses.append(
            {
                "predictor": res.predictor,
                "outcome": res.outcome,
                "subgroup_column": res.subgroup_column,
                "method": res.method_id,
                "metric": res.metric_name,
                "direction": None if res.direction is None else res.direction.symbol,
                "boot_runs": res.boot_runs,
                "dropped_rows": res.dropped_rows,
                "error": res.error,
                "records": [_record_object(rec) for rec in res.records],
            }
        )
    return {"schema_version": SCHEMA_VERSION, "results": analyses}


def emit_json(results: Sequence[AnalysisResult]) -> str:
    return json.dumps(result_payload(results), indent=2, allow_nan=False) + "\n"


def load_result_schema() -> dict[str, Any]:
    """The JSON Schema the payload of :func:`emit_json` conforms to."""
    path = resources.files("optcut").joinpath("schemas/result-v1.json")
    with path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


_CSV_COLUMNS = (
    "predictor",
    "subgroup",
    "error",
    "method",
    "metric",
    "direction",
    "pos_class",
    "neg_class",
    "optimal_cutpoint",
    "metric_name",
    "metric_value",
    "auc",
    "prevalence",
    "n",
    "n_pos",
    "n_neg",
    "accuracy",
    "sensitivity",
    "specificity",
    "cohens_kappa",
    "tp",
    "fn",
    "fp",
    "tn",
    "boot_runs",
    "boot_failed",
    "dropped_rows",
)


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    out = float(value)
    if math.isnan(out):
        return "NA"
    if math.isinf(out):
        return "Inf" if out > 0 else "-Inf"
    # repr of the Python float round-trips; numpy scalars would stringify
    # with their type name.
    return repr(out)


def emit_csv(results: Sequence[AnalysisResult]) -> str:
    """One flat row per subgroup record, fixed column order."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for res in results:
        base: dict[str, Any] = {
            "predictor": res.predictor,
            "method": res.method_id,
            "metric": res.metric_name,
            "boot_runs": res.boot_runs,
            "dropped_rows": res.dropped_rows,
        }
        if not res.records:
            row = dict(base, error=res.error)
            writer.writerow([_csv_cell(row.get(col)) for col in _CSV_COLUMNS])
            continue
        for rec in res.records:
            row = dict(base, subgroup=rec.subgroup, error=rec.error)
            if rec.error is None:
                estimate = rec.result
                panel = estimate.roc_metric_panel
                row.update(
                    direction=rec.resolution.direction.symbol,
                    pos_class=rec.resolution.pos_class,
                    neg_class=rec.resolution.neg_class,
                    optimal_cutpoint=estimate.optimal_cutpoint,
                    metric_name=estimate.method_metric_name,
                    metric_value=estimate.method_metric_value,
                    auc=estimate.auc,
                    prevalence=estimate.prevalence,
                    n=estimate.n,
                    n_pos=estimate.n_pos,
                    n_neg=estimate.n_neg,
                    accuracy=panel["accuracy"],
                    sensitivity=panel["sensitivity"],
                    specificity=panel["specificity"],
                    cohens_kappa=panel["cohens_kappa"],
                    tp=int(panel["tp"]),
                    fn=int(panel["fn"]),
                    fp=int(panel["fp"]),
                    tn=int(panel["tn"]),
                )
                if rec.boot_summary is not None:
                    row["boot_failed"] = rec.boot_summary.failed
            writer.writerow([_csv_cell(row.get(col)) for col in _CSV_COLUMNS])
    return buffer.getvalue()


def emit_text(results: Sequence[AnalysisResult]) -> str:
    return "\n".join(summarize_analysis(res) for res in results)


# --- plot data export -------------------------------------------------------


@dataclass(frozen=True)
class PlotDataBundle:
    """Paths of the plot-ready CSV files one export produced."""

    roc_points: Path
    metric_by_cutpoint: Path
    boot_cutpoints: Path
    boot_metric_oob: Path
    predictor_histogram: Path


def _aligned_indices(
    cutpoints: np.ndarray, grid: np.ndarray, direction: Direction
) -> np.ndarray:
    """Vectorized twin of ``RocCurve.threshold_index`` over a grid."""
    if direction is Direction.GE:
        pos = np.searchsorted(cutpoints[::-1], grid, side="left")
        return cutpoints.size - 1 - np.minimum(pos, cutpoints.size - 1)
    pos = np.searchsorted(cutpoints, grid, side="right") - 1
    return np.maximum(pos, 0)


def _ok_records(result: AnalysisResult) -> list[SubgroupRecord]:
    return [rec for rec in result.records if rec.error is None]


def _write_plot_csv(
    path: Path, header: list[str], rows: Iterable[Sequence[Any]]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(value) for value in row])


def _metric_band(
    record: SubgroupRecord, metric: MetricSpec, grid: np.ndarray, conf_level: float
) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-cutpoint quantile band of the in-bag metric across repetitions."""
    curves = [rep.curve_b for rep in record.boot_reps if rep.error is None]
    curves = [curve for curve in curves if curve is not None]
    if not curves:
        return None
    direction = record.resolution.direction
    matrix = np.empty((len(curves), grid.size))
    for row, curve in enumerate(curves):
        values = evaluate_metric(metric, curve).values
        matrix[row] = values[_aligned_indices(curve.cutpoints, grid, direction)]
    lo = (1.0 - conf_level) / 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        band = np.nanquantile(matrix, [lo, 1.0 - lo], axis=0)
    return band[0], band[1]


def _class_values(record: SubgroupRecord) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-class predictor values recovered from the curve's count increments.

    With midpoint cutpoints the recovered values are the midpoints, not the
    raw data.
    """
    curve = record.curve
    cuts = curve.cutpoints[1:]
    pos_counts = np.diff(curve.tp)
    neg_counts = np.diff(curve.fp)
    return {
        str(record.resolution.neg_class): (cuts, neg_counts),
        str(record.resolution.pos_class): (cuts, pos_counts),
    }


def _histogram_rows(record: SubgroupRecord, tag: list[Any]) -> list[list[Any]]:
    per_class = _class_values(record)
    pooled = np.concatenate(
        [values[counts > 0] for values, counts in per_class.values()]
    )
    if pooled.size == 0:
        return []
    integral = bool(np.all(pooled == np.floor(pooled)))
    if integral:
        edges = np.arange(math.floor(pooled.min()) - 0.5, math.ceil(pooled.max()) + 1.5)
    else:
        sample = np.repeat(
            np.concatenate([values for values, _ in per_class.values()]),
            np.concatenate([counts for _, counts in per_class.values()]).astype(int),
        )
        edges = np.histogram_bin_edges(sample, bins="fd")
        if edges.size > _MAX_HISTOGRAM_BINS + 1:
            edges = np.linspace(pooled.min(), pooled.max(), _MAX_HISTOGRAM_BINS + 1)
    rows = []
    for label, (values, counts) in per_class.items():
        binned, _ = np.histogram(values, bins=edges, weights=counts.astype(float))
        for left, right, count in zip(edges[:-1], edges[1:], binned):
            rows.append([label, float(left), float(right), int(round(count))] + tag)
    return rows


def export_plot_data(
    result: AnalysisResult, out_dir: str | Path, conf_level: float = 0.95
) -> PlotDataBundle:
    """Write the five plot-data CSV files for one analysis.

    All five files are always written; the bootstrap files are header-only
    when the analysis ran without bootstrapping.  With a subgroup column
    every file carries a trailing ``subgroup`` column.
    """
    if not 0.0 < conf_level < 1.0:
        raise ValueError("conf_level must be strictly between 0 and 1")
    if result.error is not None or not result.records:
        raise DataError(f"nothing to plot: analysis failed: {result.error}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grouped = result.subgroup_column is not None
    bootstrapped = result.boot_runs > 0
    records = _ok_records(result)
    if not records:
        raise DataError("nothing to plot: every subgroup failed")

    def tag(rec: SubgroupRecord) -> list[Any]:
        return [str(rec.subgroup)] if grouped else []

    suffix = ["subgroup"] if grouped else []

    roc_rows = []
    for rec in records:
        curve = rec.curve
        for fpr, tpr, cut in zip(curve.fpr, curve.tpr, curve.cutpoints):
            roc_rows.append([float(fpr), float(tpr), float(cut)] + tag(rec))
    roc_path = out / "roc_points.csv"
    _write_plot_csv(roc_path, ["fpr", "tpr", "cutpoint"] + suffix, roc_rows)

    metric_header = ["cutpoint", "metric"]
    if bootstrapped:
        metric_header += ["ci_lower", "ci_upper"]
    metric_rows = []
    for rec in records:
        curve = rec.curve
        grid = curve.cutpoints[1:]
        values = evaluate_metric(result.metric_spec, curve).values[1:]
        band = (
            _metric_band(rec, result.metric_spec, grid, conf_level)
            if bootstrapped
            else None
        )
        for index, (cut, value) in enumerate(zip(grid, values)):
            row: list[Any] = [float(cut), float(value)]
            if bootstrapped:
                if band is None:
                    row += [float("nan"), float("nan")]
                else:
                    row += [float(band[0][index]), float(band[1][index])]
            metric_rows.append(row + tag(rec))
    metric_path = out / "metric_by_cutpoint.csv"
    _write_plot_csv(metric_path, metric_header + suffix, metric_rows)

    boot_cut_rows = []
    boot_oob_rows = []
    for rec in records:
        for rep in rec.boot_reps:
            if rep.error is not None:
                continue
            boot_cut_rows.append([rep.rep, float(rep.in_bag_cutpoint)] + tag(rec))
            oob = rep.metrics_oob.get(rep.main_metric_name, float("nan"))
            if not math.isnan(oob):
                boot_oob_rows.append([rep.rep, float(oob)] + tag(rec))
    cuts_path = out / "boot_cutpoints.csv"
    _write_plot_csv(cuts_path, ["rep", "cutpoint"] + suffix, boot_cut_rows)
    oob_path = out / "boot_metric_oob.csv"
    _write_plot_csv(oob_path, ["rep", "metric_oob"] + suffix, boot_oob_rows)

    hist_rows = []
    for rec in records:
        hist_rows.extend(_histogram_rows(rec, tag(rec)))
    hist_path = out / "predictor_histogram.csv"
    _write_plot_csv(
        hist_path, ["class", "bin_left", "bin_right", "count"] + suffix, hist_rows
    )

    return PlotDataBundle(
        roc_points=roc_path,
        metric_by_cutpoint=metric_path,
        boot_cutpoints=cuts_path,
        boot_metric_oob=oob_path,
        predictor_histogram=hist_path,
    )


# --- command line -----------------------------------------------------------


@dataclass(frozen=True)
class CliConfig:
    """Everything one ``analyze`` invocation needs, parsed and validated."""

    input_path: str
    outcome: str
    predictors: tuple[str, ...] = ()
    subgroup: str | None = None
    pos_class: str | None = None
    neg_class: str | None = None
    direction: str = "auto"
    per_subgroup_direction: bool = False
    method: MethodSpec = field(default_factory=MethodSpec)
    metric: MetricSpec = field(default_factory=MetricSpec)
    boot_runs: int = 0
    boot_stratify: bool = False
    seed: int | None = None
    workers: int = 1
    output_format: str = "text-summary"
    plot_dir: str | None = None
    conf_level: float = 0.95

    def __post_init__(self) -> None:
        if self.direction not in ("auto", "ge", "le"):
            raise ValueError("direction must be auto, ge, or le")
        if not 0.0 < self.conf_level < 1.0:
            raise ValueError("conf-level must be strictly between 0 and 1")
        if self.workers < 1:
            raise ValueError("parallel worker count must be at least 1")
        canonical_metric_id(self.metric.metric_id)


def _workers_from(value: int | None) -> int:
    """Explicit flag wins; otherwise the environment; otherwise serial."""
    if value is not None:
        return value
    env = os.environ.get(_WORKERS_ENV, "").strip()
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{_WORKERS_ENV} must be an integer, got {env!r}") from None


def _split_flag(text: str) -> tuple[str, ...]:
    return tuple(token.strip() for token in text.split(",") if token.strip())


def config_from_args(namespace: argparse.Namespace) -> CliConfig:
    method = MethodSpec(
        method_id=namespace.method,
        boot_cut_count=namespace.boot_cut,
        summary_fn=namespace.summary_fn,
        manual_cutpoint=namespace.manual_cutpoint,
        tie_break=namespace.tie_break,
        use_midpoints=namespace.use_midpoints,
        seed=namespace.seed,
        spline_smoothing=namespace.spline_smoothing,
        gam_basis_dim=namespace.gam_basis_dim,
        loess_degree=namespace.loess_degree,
    )
    metric = MetricSpec(
        metric_id=namespace.metric,
        cost_fp=namespace.cost_fp,
        cost_fn=namespace.cost_fn,
        utility_tp=namespace.utility_tp,
        utility_tn=namespace.utility_tn,
        main_metric=namespace.main_metric,
        constrain_metric=namespace.constrain_metric,
        min_constrain=namespace.min_constrain,
    )
    return CliConfig(
        input_path=namespace.input,
        outcome=namespace.outcome,
        predictors=_split_flag(namespace.predictors),
        subgroup=namespace.subgroup,
        pos_class=namespace.pos_class,
        neg_class=namespace.neg_class,
        direction=namespace.direction,
        per_subgroup_direction=namespace.per_subgroup_direction,
        method=method,
        metric=metric,
        boot_runs=namespace.boot_runs,
        boot_stratify=namespace.boot_stratify,
        seed=namespace.seed,
        workers=_workers_from(namespace.parallel),
        output_format=namespace.format,
        plot_dir=namespace.plot_dir,
        conf_level=namespace.conf_level,
    )


def run_config(
    config: CliConfig,
    stdout: TextIO | None = None,
    stdin: TextIO | None = None,
) -> int:
    """Execute one ``analyze`` invocation; returns the exit code."""
    out = sys.stdout if stdout is None else stdout
    source: str | TextIO
    if config.input_path == "-":
        source = sys.stdin if stdin is None else stdin
    else:
        source = config.input_path
    table = ingest_csv(
        source,
        outcome=config.outcome,
        predictors=config.predictors,
        subgroup=config.subgroup,
    )
    boot = None
    if config.boot_runs > 0:
        boot = BootConfig(
            boot_runs=config.boot_runs,
            stratified=config.boot_stratify,
            seed=config.seed,
            workers=config.workers,
        )
    request = AnalysisRequest(
        table=table,
        outcome=config.outcome,
        predictors=config.predictors,
        subgroup=config.subgroup,
        pos_class=config.pos_class,
        neg_class=config.neg_class,
        direction=None if config.direction == "auto" else config.direction,
        per_subgroup_direction=config.per_subgroup_direction,
        method=config.method,
        metric=config.metric,
        boot=boot,
    )
    if len(config.predictors) == 1:
        results: tuple[AnalysisResult, ...] = (run_analysis(request),)
    else:
        results = run_multi(request)

    emitter = {"json": emit_json, "csv": emit_csv, "text-summary": emit_text}
    out.write(emitter[config.output_format](results))

    if config.plot_dir is not None:
        plottable = [res for res in results if res.records]
        if len(results) == 1 and results[0].records:
            export_plot_data(results[0], config.plot_dir, config.conf_level)
        else:
            for res in plottable:
                export_plot_data(
                    res, Path(config.plot_dir) / res.predictor, config.conf_level
                )

    if results and all(res.error is not None for res in results):
        print("error: every analysis failed", file=sys.stderr)
        return 3
    return 0


def _sim_rows(result: simlab.SimResult) -> list[list[Any]]:
    rows = []
    for cell in result.cells:
        rows.append(
            [
                cell.scenario_id,
                cell.family,
                cell.level,
                cell.n,
                cell.method_id,
                cell.mae,
                cell.repetitions,
                cell.failures,
                cell.true_cutpoint,
                cell.achieved_youden,
                result.seed,
            ]
        )
    return rows


_SIM_HEADER = [
    "scenario_id",
    "family",
    "level",
    "n",
    "method",
    "mae",
    "repetitions",
    "failures",
    "true_cutpoint",
    "achieved_youden",
    "seed",
]

_BENCH_HEADER = ["n", "path", "median_seconds", "peak_bytes", "error"]


def _write_rows(
    header: list[str], rows: list[list[Any]], out_path: str | None, stdout: TextIO
) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(value) for value in row])
    text = buffer.getvalue()
    if out_path is None:
        stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def run_sim_command(namespace: argparse.Namespace, stdout: TextIO) -> int:
    families = _split_flag(namespace.families)
    for family in families:
        if family not in simlab.FAMILIES:
            raise ValueError(
                f"unknown family {family!r}; choose from {', '.join(simlab.FAMILIES)}"
            )
    levels = tuple(int(token) for token in _split_flag(namespace.levels))
    sizes = tuple(int(token) for token in _split_flag(namespace.sizes))
    methods = _split_flag(namespace.methods)
    scenarios = simlab.scenario_grid(families, levels, sizes)
    result = simlab.run_simulation(
        scenarios,
        methods=methods,
        repetitions=namespace.reps,
        seed=namespace.seed,
        workers=_workers_from(namespace.parallel),
    )
    _write_rows(_SIM_HEADER, _sim_rows(result), namespace.out, stdout)
    return 0


def run_bench_command(namespace: argparse.Namespace, stdout: TextIO) -> int:
    sizes = tuple(int(token) for token in _split_flag(namespace.sizes))
    rows = simlab.run_benchmark(sizes, repetitions=namespace.reps)
    table = [
        [row.n, row.path, row.median_seconds, row.peak_bytes, row.error]
        for row in rows
    ]
    _write_rows(_BENCH_HEADER, table, namespace.out, stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optcut",
        description="Optimal cutpoint estimation for binary classification.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser(
        "analyze", help="estimate cutpoints from a CSV table"
    )
    analyze.add_argument("input", help="CSV path, or - for stdin")
    analyze.add_argument(
        "--class",
        dest="outcome",
        required=True,
        metavar="COLUMN",
        help="binary class column",
    )
    analyze.add_argument(
        "--x",
        dest="predictors",
        default="",
        metavar="COLUMNS",
        help="comma-separated predictor columns; default: every numeric column",
    )
    analyze.add_argument("--subgroup", metavar="COLUMN")
    analyze.add_argument("--pos-class", metavar="VALUE")
    analyze.add_argument("--neg-class", metavar="VALUE")
    analyze.add_argument("--direction", choices=("auto", "ge", "le"), default="auto")
    analyze.add_argument("--method", choices=METHOD_IDS, default="empirical")
    analyze.add_argument(
        "--metric",
        default="sum_sens_spec",
        help="selection metric name (aliases accepted)",
    )
    analyze.add_argument("--cost-fp", type=float, default=None)
    analyze.add_argument("--cost-fn", type=float, default=None)
    analyze.add_argument("--utility-tp", type=float, default=None)
    analyze.add_argument("--utility-tn", type=float, default=None)
    analyze.add_argument("--main-metric", default=None)
    analyze.add_argument("--constrain-metric", default=None)
    analyze.add_argument("--min-constrain", type=float, default=None)
    analyze.add_argument("--tie-break", choices=TIE_BREAKS, default="median")
    analyze.add_argument("--use-midpoints", action="store_true")
    analyze.add_argument("--manual-cutpoint", type=float, default=None)
    analyze.add_argument(
        "--boot-cut",
        type=int,
        default=50,
        metavar="N",
        help="resamples for the boot_cut method",
    )
    analyze.add_argument("--summary-fn", choices=SUMMARY_FNS, default="mean")
    analyze.add_argument("--spline-smoothing", type=float, default=1.0)
    analyze.add_argument("--gam-basis-dim", type=int, default=10)
    analyze.add_argument("--loess-degree", type=int, default=1)
    analyze.add_argument(
        "--boot-runs",
        type=int,
        default=0,
        metavar="N",
        help="bootstrap validation repetitions; 0 disables",
    )
    analyze.add_argument("--boot-stratify", action="store_true")
    analyze.add_argument("--per-subgroup-direction", action="store_true")
    analyze.add_argument("--seed", type=int, default=None)
    analyze.add_argument(
        "--parallel",
        type=int,
        default=None,
        metavar="WORKERS",
        help=f"worker processes; default ${_WORKERS_ENV} or 1",
    )
    analyze.add_argument(
        "--format",
        choices=("text-summary", "json", "csv"),
        default="text-summary",
    )
    analyze.add_argument(
        "--plot-dir",
        default=None,
        metavar="DIR",
        help="write plot-data CSV files here (per-predictor subdirs for several)",
    )
    analyze.add_argument("--conf-level", type=float, default=0.95)

    sim = commands.add_parser("simlab", help="simulation and timing harness")
    sim_commands = sim.add_subparsers(dest="sim_command", required=True)

    run_p = sim_commands.add_parser("run", help="method comparison over the grid")
    run_p.add_argument("--families", default=",".join(simlab.FAMILIES))
    run_p.add_argument(
        "--levels", default=",".join(str(level) for level in simlab.LEVELS)
    )
    run_p.add_argument(
        "--sizes", default=",".join(str(size) for size in simlab.SIZES)
    )
    run_p.add_argument("--reps", type=int, default=500)
    run_p.add_argument("--methods", default=",".join(simlab.DEFAULT_METHODS))
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--parallel", type=int, default=None, metavar="WORKERS")
    run_p.add_argument("--out", default=None, metavar="FILE")

    bench_p = sim_commands.add_parser("bench", help="time the estimation paths")
    bench_p.add_argument("--sizes", default="1000,10000,100000")
    bench_p.add_argument("--reps", type=int, default=3)
    bench_p.add_argument("--out", default=None, metavar="FILE")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    try:
        if namespace.command == "analyze":
            return run_config(config_from_args(namespace))
        if namespace.sim_command == "run":
            return run_sim_command(namespace, sys.stdout)
        return run_bench_command(namespace, sys.stdout)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
