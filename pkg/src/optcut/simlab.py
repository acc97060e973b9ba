"""Method-comparison simulation and scalability benchmark, desk scale.

Three distribution families at four nominal separation levels and nine
sample sizes (108 scenarios).  Each repetition draws one sample per
scenario, runs every requested method on it, and scores the absolute
distance to the true population-optimal cutpoint; cells aggregate the
median.  The nominal levels are labels only: the runner recomputes the
Youden index each scenario actually achieves from the analytic CDFs
(with the heavy-tailed lognormal settings the achieved values sit far
below the labels).

The lognormal "mean"/"sd" settings are log-scale parameters.  A
natural-scale reading would be defensible too; only the log-scale one is
implemented.
"""

from __future__ import annotations

import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._rng import substream
from .errors import DataError, NumericError
from .estimators import MethodSpec, estimate_cutpoint
from .metrics import MetricSpec
from .roc import Direction, Sample, auc, build_roc

__all__ = [
    "SimScenario",
    "SimCell",
    "SimResult",
    "BenchRow",
    "DEFAULT_METHODS",
    "FAMILIES",
    "LEVELS",
    "SIZES",
    "make_scenario",
    "scenario_grid",
    "true_optimal_cutpoint",
    "achieved_youden",
    "run_simulation",
    "run_benchmark",
    "scaling_slope",
    "ROC_PEAK_BYTES_PER_ROW",
]

FAMILIES = ("normal", "lognormal", "gamma")
LEVELS = (1, 2, 3, 4)
SIZES = (30, 50, 75, 100, 150, 250, 500, 750, 1000)

# Control-group parameters per family and the experimental-group value
# that varies with the separation level.  Parameter pairs are
# (mean, sd) for normal, (log-mean, log-sd) for lognormal, and
# (shape, rate) for gamma.
_CONTROL = {"normal": (100.0, 10.0), "lognormal": (2.5, 2.5), "gamma": (2.0, 0.5)}
_EXPERIMENTAL = {
    "normal": (105.05, 110.49, 116.83, 125.63),
    "lognormal": (2.76, 3.02, 3.34, 3.78),
    "gamma": (0.344, 0.233, 0.143, 0.072),
}

DEFAULT_METHODS = (
    "empirical",
    "normal_youden",
    "kernel_youden",
    "boot_cut",
    "gam_smooth",
    "spline_smooth",
    "loess_smooth",
)


@dataclass(frozen=True)
class SimScenario:
    """One data-generating setting: family, separation level, sample size.

    ``neg_params``/``pos_params`` hold the family's parameter pairs for
    the control (negative) and experimental (positive) group.  Build
    grid scenarios through :func:`make_scenario`; custom parameter pairs
    are allowed for ad-hoc settings.
    """

    family: str
    level: int
    n: int
    neg_params: tuple[float, float]
    pos_params: tuple[float, float]

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 4:
            raise ValueError("scenario needs n >= 4")

    @property
    def scenario_id(self) -> str:
        return f"{self.family}-L{self.level}-n{self.n}"

    @property
    def n_pos(self) -> int:
        return self.n // 2

    @property
    def n_neg(self) -> int:
        return self.n - self.n // 2


def make_scenario(family: str, level: int, n: int) -> SimScenario:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    control = _CONTROL[family]
    exp_value = _EXPERIMENTAL[family][level - 1]
    if family == "gamma":
        pos = (control[0], exp_value)
    else:
        pos = (exp_value, control[1])
    return SimScenario(family=family, level=level, n=n, neg_params=control, pos_params=pos)


def scenario_grid(
    families: tuple[str, ...] = FAMILIES,
    levels: tuple[int, ...] = LEVELS,
    sizes: tuple[int, ...] = SIZES,
) -> tuple[SimScenario, ...]:
    return tuple(
        make_scenario(f, lvl, n) for f in families for lvl in levels for n in sizes
    )


def _cdf(family: str, params: tuple[float, float], grid: np.ndarray) -> np.ndarray:
    if family == "normal":
        return stats.norm.cdf(grid, loc=params[0], scale=params[1])
    if family == "lognormal":
        return stats.lognorm.cdf(grid, params[1], scale=np.exp(params[0]))
    return stats.gamma.cdf(grid, params[0], scale=1.0 / params[1])


def _ppf(family: str, params: tuple[float, float], q: float) -> float:
    if family == "normal":
        return float(stats.norm.ppf(q, loc=params[0], scale=params[1]))
    if family == "lognormal":
        return float(stats.lognorm.ppf(q, params[1], scale=np.exp(params[0])))
    return float(stats.gamma.ppf(q, params[0], scale=1.0 / params[1]))


def _draw(
    family: str, params: tuple[float, float], size: int, gen: np.random.Generator
) -> np.ndarray:
    if family == "normal":
        return gen.normal(params[0], params[1], size)
    if family == "lognormal":
        return gen.lognormal(params[0], params[1], size)
    return gen.gamma(params[0], 1.0 / params[1], size)


def true_optimal_cutpoint(scenario: SimScenario, grid_points: int = 4001) -> float:
    """Population Youden maximizer from the analytic CDFs.

    Equal-sd normal scenarios short-circuit to the exact midpoint of the
    two means; everything else runs a dense grid over the pooled
    quantile range with three refinement rounds around the argmax.  The
    result is stable under refining the grid severalfold.
    """
    if scenario.family == "normal" and scenario.neg_params[1] == scenario.pos_params[1]:
        return (scenario.neg_params[0] + scenario.pos_params[0]) / 2.0
    lo = min(
        _ppf(scenario.family, scenario.neg_params, 1e-4),
        _ppf(scenario.family, scenario.pos_params, 1e-4),
    )
    hi = max(
        _ppf(scenario.family, scenario.neg_params, 1.0 - 1e-4),
        _ppf(scenario.family, scenario.pos_params, 1.0 - 1e-4),
    )
    best = lo
    for _ in range(4):
        grid = np.linspace(lo, hi, grid_points)
        youden = _cdf(scenario.family, scenario.neg_params, grid) - _cdf(
            scenario.family, scenario.pos_params, grid
        )
        best = float(grid[int(np.argmax(youden))])
        step = (hi - lo) / (grid_points - 1)
        lo, hi = best - step, best + step
    return best


def achieved_youden(scenario: SimScenario) -> float:
    """Youden index the scenario's populations reach at the true cutpoint."""
    cut = np.array([true_optimal_cutpoint(scenario)])
    gap = _cdf(scenario.family, scenario.neg_params, cut) - _cdf(
        scenario.family, scenario.pos_params, cut
    )
    return float(gap[0])


# --- simulation -------------------------------------------------------------


@dataclass(frozen=True)
class SimCell:
    """Aggregate for one scenario x method pair."""

    scenario_id: str
    family: str
    level: int
    n: int
    method_id: str
    mae: float
    repetitions: int
    failures: int
    true_cutpoint: float
    achieved_youden: float


@dataclass(frozen=True)
class SimResult:
    cells: tuple[SimCell, ...]
    repetitions: int
    seed: int


def _method_spec(method_id: str, seed: int) -> MethodSpec:
    if method_id == "boot_cut":
        return MethodSpec(method_id="boot_cut", seed=seed)
    return MethodSpec(method_id=method_id)


def _run_cell(
    scenario: SimScenario,
    methods: tuple[str, ...],
    repetitions: int,
    seed: int,
) -> list[SimCell]:
    """All repetitions of one scenario; every method sees the same draws.

    Streams key off the scenario identity (family index, level, n), not
    its position in the grid, so subsetting scenarios never changes the
    numbers of the ones that remain.
    """
    cut = true_optimal_cutpoint(scenario)
    target = achieved_youden(scenario)
    family_index = FAMILIES.index(scenario.family)
    cell_key = (family_index, scenario.level, scenario.n)
    errors = {m: np.full(repetitions, np.nan) for m in methods}
    failures = dict.fromkeys(methods, 0)
    metric = MetricSpec(metric_id="sum_sens_spec")
    for rep in range(repetitions):
        gen = substream(seed, *cell_key, rep)
        x_neg = _draw(scenario.family, scenario.neg_params, scenario.n_neg, gen)
        x_pos = _draw(scenario.family, scenario.pos_params, scenario.n_pos, gen)
        sample = Sample(
            x=np.concatenate([x_neg, x_pos]),
            y=np.repeat([False, True], [scenario.n_neg, scenario.n_pos]),
            pos_class=1,
            neg_class=0,
        )
        for m_index, method_id in enumerate(methods):
            spec = _method_spec(method_id, seed)
            try:
                est = estimate_cutpoint(
                    sample,
                    Direction.GE,
                    metric,
                    spec,
                    stream_path=(*cell_key, rep, m_index),
                )
            except (DataError, NumericError):
                failures[method_id] += 1
                continue
            errors[method_id][rep] = abs(est.optimal_cutpoint - cut)
    cells = []
    for method_id in methods:
        errs = errors[method_id]
        kept = errs[~np.isnan(errs)]
        cells.append(
            SimCell(
                scenario_id=scenario.scenario_id,
                family=scenario.family,
                level=scenario.level,
                n=scenario.n,
                method_id=method_id,
                mae=float(np.median(kept)) if kept.size else float("nan"),
                repetitions=repetitions,
                failures=failures[method_id],
                true_cutpoint=cut,
                achieved_youden=target,
            )
        )
    return cells


def run_simulation(
    scenarios: tuple[SimScenario, ...],
    methods: tuple[str, ...] = DEFAULT_METHODS,
    repetitions: int = 500,
    seed: int | None = None,
    workers: int = 1,
) -> SimResult:
    """Score every method on every scenario; deterministic per seed.

    Within a repetition all methods see the same sample, so cell
    comparisons are paired.  Per-method estimation failures are counted
    and excluded; a cell where every repetition failed reports NaN.
    Results are identical for any ``workers`` count.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not scenarios:
        raise ValueError("no scenarios given")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    cells: list[SimCell] = []
    if workers == 1:
        for scenario in scenarios:
            cells.extend(_run_cell(scenario, tuple(methods), repetitions, seed))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_cell, scenario, tuple(methods), repetitions, seed)
                for scenario in scenarios
            ]
            for future in futures:
                cells.extend(future.result())
    return SimResult(cells=tuple(cells), repetitions=repetitions, seed=seed)


# --- benchmark --------------------------------------------------------------

# Peak transient allocation of the roc-only path (sorted copies, cumulative
# counts, run-boundary masks), beyond the input sample itself.  Measured
# ~73 B/row; documented with headroom.
ROC_PEAK_BYTES_PER_ROW = 128


@dataclass(frozen=True)
class BenchRow:
    n: int
    path: str
    median_seconds: float
    peak_bytes: int
    error: str | None = None


def _bench_sample(n: int, seed: int) -> Sample:
    gen = substream(seed, n)
    x = gen.normal(0.0, 1.0, n)
    y = gen.random(n) < 0.5
    if not y.any():
        y[0] = True
    if y.all():
        y[0] = False
    return Sample(x=x, y=y, pos_class=1, neg_class=0)


def _bench_once(sample: Sample, path: str) -> None:
    if path == "roc":
        auc(build_roc(sample, Direction.GE))
    else:
        estimate_cutpoint(sample, Direction.GE, MetricSpec(metric_id="sum_sens_spec"))


def run_benchmark(
    sizes: tuple[int, ...],
    repetitions: int = 3,
    seed: int = 0,
    paths: tuple[str, ...] = ("roc", "full"),
) -> tuple[BenchRow, ...]:
    """Median wall time and peak traced allocation per size and path.

    Data generation happens outside the timed region.  Memory is traced
    on a separate untimed pass so tracing overhead never distorts the
    medians.  A size that cannot be allocated is reported with an error
    and the remaining sizes still run.
    """
    if min(sizes) < 100:
        raise ValueError("benchmark sizes start at 100")
    rows: list[BenchRow] = []
    for n in sizes:
        for path in paths:
            if path not in ("roc", "full"):
                raise ValueError(f"unknown benchmark path {path!r}")
            try:
                sample = _bench_sample(n, seed)
                tracemalloc.start()
                _bench_once(sample, path)
                peak = tracemalloc.get_traced_memory()[1]
                tracemalloc.stop()
                times = []
                for _ in range(repetitions):
                    start = time.perf_counter()
                    _bench_once(sample, path)
                    times.append(time.perf_counter() - start)
                rows.append(
                    BenchRow(
                        n=n,
                        path=path,
                        median_seconds=float(np.median(times)),
                        peak_bytes=int(peak),
                    )
                )
            except MemoryError:
                tracemalloc.stop()
                rows.append(
                    BenchRow(
                        n=n, path=path, median_seconds=float("nan"), peak_bytes=0,
                        error="allocation failed",
                    )
                )
            finally:
                sample = None
    return tuple(rows)


def scaling_slope(rows: tuple[BenchRow, ...], path: str = "roc") -> float:
    """Log-log slope of median time against n; near 1 means near-linear."""
    picked = [r for r in rows if r.path == path and r.error is None]
    if len(picked) < 2:
        raise ValueError("need at least two successful sizes")
    log_n = np.log([r.n for r in picked])
    log_t = np.log([r.median_seconds for r in picked])
    return float(np.polyfit(log_n, log_t, 1)[0])
