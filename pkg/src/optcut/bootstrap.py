"""Bootstrap validation of cutpoint estimation.

Repeats the chosen estimation method on with-replacement resamples, applies
each in-bag cutpoint to the in-bag and out-of-bag observations, and
summarizes the resulting panels.  Repetition ``r`` draws from a random
stream derived from ``(seed, r)``, so runs are reproducible and identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ._rng import substream
from .errors import NumericError
from .estimators import _MAX_REDRAWS, MethodSpec, estimate_boot_cut, estimate_cutpoint
from .metrics import MetricSpec, canonical_metric_id, evaluate_metric_at
from .roc import ConfusionCounts, Direction, RocCurve, Sample, auc, build_roc

_PANEL_METRICS = ("accuracy", "sensitivity", "specificity", "cohens_kappa")
_COUNT_FIELDS = ("tp", "fp", "tn", "fn")


@dataclass(frozen=True)
class BootConfig:
    """Validation settings.  ``boot_runs = 0`` disables validation.

    A few hundred repetitions give stable summaries; common practice is
    1000 to 2000.  ``seed=None`` draws fresh entropy and stores it so the
    run stays replayable.
    """

    boot_runs: int = 1000
    stratified: bool = False
    seed: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.boot_runs < 0:
            raise ValueError("boot_runs must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.seed is None:
            object.__setattr__(self, "seed", int(np.random.SeedSequence().entropy))

    @property
    def parallel(self) -> bool:
        return self.workers > 1


@dataclass(frozen=True, eq=False)
class BootRepetition:
    """One validation repetition.

    ``metrics_b`` holds the in-bag panel, ``metrics_oob`` the out-of-bag
    panel, both keyed auc / main metric / accuracy / sensitivity /
    specificity / cohens_kappa / tp / fp / tn / fn.  Out-of-bag entries are
    NaN when the out-of-bag set is empty (or lacks a class, for auc).  A
    repetition whose estimation failed carries ``error`` and NaN panels.
    """

    rep: int
    in_bag_indices: NDArray[np.int64]
    in_bag_cutpoint: float
    main_metric_name: str
    metrics_b: dict[str, float]
    metrics_oob: dict[str, float]
    curve_b: RocCurve | None
    curve_oob: RocCurve | None
    oob_size: int
    redraws: int = 0
    error: str | None = None


@dataclass(frozen=True)
class BootSummary:
    """Order-statistics table over repetitions, one row per variable."""

    rows: dict[str, dict[str, float]]
    boot_runs: int
    failed: int


def _tally(
    x: NDArray[np.float64], y: NDArray[np.bool_], threshold: float, direction: Direction
) -> ConfusionCounts:
    """Confusion counts by direct classification; tolerates one-class data."""
    pred = x >= threshold if direction is Direction.GE else x <= threshold
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & y)),
        fp=int(np.count_nonzero(pred & ~y)),
        tn=int(np.count_nonzero(~pred & ~y)),
        fn=int(np.count_nonzero(~pred & y)),
    )


def _panel(
    counts: ConfusionCounts, auc_value: float, metric: MetricSpec, main_name: str
) -> dict[str, float]:
    panel = {"auc": float(auc_value), main_name: evaluate_metric_at(metric, counts)}
    for name in _PANEL_METRICS:
        panel[name] = evaluate_metric_at(MetricSpec(metric_id=name), counts)
    for name in _COUNT_FIELDS:
        panel[name] = float(getattr(counts, name))
    return panel


def _failed_rep(
    rep: int,
    in_bag: NDArray[np.int64],
    oob_size: int,
    main_name: str,
    redraws: int,
    message: str,
) -> BootRepetition:
    return BootRepetition(
        rep=rep,
        in_bag_indices=in_bag,
        in_bag_cutpoint=float("nan"),
        main_metric_name=main_name,
        metrics_b={},
        metrics_oob={},
        curve_b=None,
        curve_oob=None,
        oob_size=oob_size,
        redraws=redraws,
        error=message,
    )


def _one_rep(
    sample: Sample,
    direction: Direction,
    metric: MetricSpec,
    method: MethodSpec,
    seed: int,
    rep: int,
    stratified: bool,
    main_name: str,
    stream_path: tuple[int, ...] = (),
) -> BootRepetition:
    gen = substream(seed, *stream_path, rep)
    n = sample.n
    y = sample.y
    redraws = 0
    if stratified:
        pos = np.flatnonzero(y)
        neg = np.flatnonzero(~y)
        in_bag = np.concatenate(
            [
                pos[gen.integers(0, pos.size, size=pos.size)],
                neg[gen.integers(0, neg.size, size=neg.size)],
            ]
        )
    else:
        for _ in range(_MAX_REDRAWS + 1):
            in_bag = gen.integers(0, n, size=n)
            picked = y[in_bag]
            if picked.any() and not picked.all():
                break
            redraws += 1
        else:
            oob = np.setdiff1d(np.arange(n), in_bag)
            return _failed_rep(
                rep,
                in_bag,
                oob.size,
                main_name,
                redraws,
                f"in-bag resample still missing a class after {_MAX_REDRAWS} redraws",
            )
    oob = np.setdiff1d(np.arange(n), in_bag)
    in_sample = sample.take(in_bag)
    try:
        if method.method_id == "boot_cut":
            est = estimate_boot_cut(
                in_sample,
                direction,
                metric,
                boot_cut_count=method.boot_cut_count,
                summary_fn=method.summary_fn,
                seed=seed,
                stream_path=(*stream_path, rep),
                tie_break=method.tie_break,
                use_midpoints=method.use_midpoints,
            )
        else:
            est = estimate_cutpoint(in_sample, direction, metric, method)
    except NumericError as exc:
        return _failed_rep(rep, in_bag, oob.size, main_name, redraws, str(exc))
    cut = est.optimal_cutpoint
    counts_b = ConfusionCounts(
        tp=int(est.roc_metric_panel["tp"]),
        fp=int(est.roc_metric_panel["fp"]),
        tn=int(est.roc_metric_panel["tn"]),
        fn=int(est.roc_metric_panel["fn"]),
    )
    metrics_b = _panel(counts_b, est.auc, metric, main_name)
    x_oob = sample.x[oob]
    y_oob = y[oob]
    curve_oob = None
    if oob.size == 0:
        metrics_oob = {name: float("nan") for name in metrics_b}
    else:
        auc_oob = float("nan")
        if y_oob.any() and not y_oob.all():
            curve_oob = build_roc(
                Sample(
                    x=x_oob,
                    y=y_oob,
                    pos_class=sample.pos_class,
                    neg_class=sample.neg_class,
                ),
                direction,
            )
            auc_oob = auc(curve_oob)
        metrics_oob = _panel(_tally(x_oob, y_oob, cut, direction), auc_oob, metric, main_name)
    return BootRepetition(
        rep=rep,
        in_bag_indices=in_bag,
        in_bag_cutpoint=float(cut),
        main_metric_name=main_name,
        metrics_b=metrics_b,
        metrics_oob=metrics_oob,
        curve_b=build_roc(in_sample, direction),
        curve_oob=curve_oob,
        oob_size=int(oob.size),
        redraws=redraws,
    )


def _rep_batch(
    sample: Sample,
    direction: Direction,
    metric: MetricSpec,
    method: MethodSpec,
    seed: int,
    reps: list[int],
    stratified: bool,
    main_name: str,
    stream_path: tuple[int, ...] = (),
) -> list[BootRepetition]:
    return [
        _one_rep(
            sample, direction, metric, method, seed, rep, stratified, main_name, stream_path
        )
        for rep in reps
    ]


def run_bootstrap(
    sample: Sample,
    direction: Direction,
    metric: MetricSpec | None = None,
    method: MethodSpec | None = None,
    config: BootConfig | None = None,
    stream_path: tuple[int, ...] = (),
) -> tuple[BootRepetition, ...]:
    """Run the outer validation loop; repetitions come back ordered by index.

    Results depend only on ``config.seed`` and the request, never on
    ``config.workers``.  Validating ``boot_cut`` nests its inner resampling
    under the same seed, which multiplies run time accordingly.
    ``stream_path`` prefixes every repetition's stream so callers running
    several loops under one seed keep their draws disjoint.
    """
    metric = metric if metric is not None else MetricSpec()
    method = method if method is not None else MethodSpec()
    config = config if config is not None else BootConfig()
    if config.boot_runs == 0:
        return ()
    main_name = canonical_metric_id(metric.metric_id)
    indices = np.arange(config.boot_runs)
    if config.workers == 1:
        reps = _rep_batch(
            sample,
            direction,
            metric,
            method,
            config.seed,
            indices.tolist(),
            config.stratified,
            main_name,
            stream_path,
        )
    else:
        chunks = [c.tolist() for c in np.array_split(indices, config.workers) if c.size]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(
                    _rep_batch,
                    sample,
                    direction,
                    metric,
                    method,
                    config.seed,
                    chunk,
                    config.stratified,
                    main_name,
                    stream_path,
                )
                for chunk in chunks
            ]
            reps = [rep for future in futures for rep in future.result()]
        reps.sort(key=lambda r: r.rep)
    return tuple(reps)


_ROW_STATS = ("min", "q05", "q25", "median", "mean", "q75", "q95", "max", "sd")


def summary_row(values: NDArray[np.float64]) -> dict[str, float]:
    """Order statistics over one variable; NaN entries are counted, not used."""
    arr = np.asarray(values, dtype=np.float64)
    kept = arr[~np.isnan(arr)]
    row: dict[str, float] = {}
    if kept.size == 0:
        row.update({name: float("nan") for name in _ROW_STATS})
    else:
        q = np.quantile(kept, [0.05, 0.25, 0.5, 0.75, 0.95])
        row["min"] = float(kept.min())
        row["q05"], row["q25"], row["median"], row["q75"], row["q95"] = map(float, q)
        row["mean"] = float(kept.mean())
        row["max"] = float(kept.max())
        row["sd"] = float(np.std(kept, ddof=1)) if kept.size > 1 else float("nan")
        row = {name: row[name] for name in _ROW_STATS}
    row["n"] = float(kept.size)
    row["n_missing"] = float(arr.size - kept.size)
    return row


def summarize_bootstrap(reps: tuple[BootRepetition, ...]) -> BootSummary:
    """Type-7 quantile summary of the repetition panels.

    Failed repetitions are excluded entirely and counted in ``failed``;
    within the remaining repetitions, NaN entries (missing out-of-bag
    values, undefined metrics) are excluded per variable and counted in
    that row's ``n_missing``.
    """
    if not reps:
        raise ValueError("summarize_bootstrap needs at least one repetition")
    valid = [r for r in reps if r.error is None]
    rows: dict[str, dict[str, float]] = {}
    rows["optimal_cutpoint"] = summary_row(
        np.array([r.in_bag_cutpoint for r in valid], dtype=np.float64)
    )
    if valid:
        for key in valid[0].metrics_b:
            rows[f"{key}_b"] = summary_row(
                np.array([r.metrics_b[key] for r in valid], dtype=np.float64)
            )
            rows[f"{key}_oob"] = summary_row(
                np.array([r.metrics_oob[key] for r in valid], dtype=np.float64)
            )
    return BootSummary(rows=rows, boot_runs=len(reps), failed=len(reps) - len(valid))


def _series(
    reps: tuple[BootRepetition, ...], variable: str, in_bag: bool
) -> NDArray[np.float64]:
    valid = [r for r in reps if r.error is None]
    if not valid:
        raise ValueError("no successful repetitions")
    if variable == "optimal_cutpoint":
        return np.array([r.in_bag_cutpoint for r in valid], dtype=np.float64)
    template = valid[0].metrics_b
    if variable not in template:
        known = ", ".join(["optimal_cutpoint", *template])
        raise ValueError(f"unknown variable {variable!r}; available: {known}")
    side = "metrics_b" if in_bag else "metrics_oob"
    return np.array([getattr(r, side)[variable] for r in valid], dtype=np.float64)


def boot_ci(
    reps: tuple[BootRepetition, ...],
    variable: str,
    in_bag: bool = False,
    alpha: float = 0.05,
) -> tuple[float, float]:
    """Percentile interval at levels alpha/2 and 1 - alpha/2."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be strictly between 0 and 1")
    values = _series(reps, variable, in_bag)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise ValueError(f"variable {variable!r} has no defined values")
    lo, hi = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


def cutpoint_distribution(
    reps: tuple[BootRepetition, ...],
) -> list[tuple[float, int]]:
    """Frequency table of in-bag cutpoints, sorted by cutpoint."""
    if not reps:
        raise ValueError("cutpoint_distribution needs at least one repetition")
    cuts = np.array(
        [r.in_bag_cutpoint for r in reps if r.error is None], dtype=np.float64
    )
    values, counts = np.unique(cuts, return_counts=True)
    return [(float(v), int(c)) for v, c in zip(values, counts)]
