"""Confusion-matrix metric catalog.

Every metric is a pure function of the four confusion counts, vectorized
over all cutpoints of a curve.  Divisions with zero denominator follow
IEEE semantics (0/0 -> NaN, x/0 -> +/-inf); optimization later ignores
non-finite values, so a sentinel point can never win by a 0/0 artifact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaincc

from .errors import NumericError
from .roc import ConfusionCounts, RocCurve

__all__ = [
    "MetricSpec",
    "MetricVector",
    "evaluate_metric",
    "evaluate_metric_at",
    "best_cutpoint_indices",
    "standard_metric_panel",
    "metric_sense",
    "available_metrics",
]

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


@dataclass(frozen=True)
class MetricSpec:
    """Metric selection plus the parameters some metrics need.

    ``cost_fp``/``cost_fn`` feed misclassification_cost and total_utility,
    ``utility_tp``/``utility_tn`` feed total_utility, and the
    ``main_metric``/``constrain_metric``/``min_constrain`` triple feeds the
    constrained family.  ``sense`` overrides the registry default.
    """

    metric_id: str = "sum_sens_spec"
    cost_fp: float | None = None
    cost_fn: float | None = None
    utility_tp: float | None = None
    utility_tn: float | None = None
    main_metric: str | None = None
    constrain_metric: str | None = None
    min_constrain: float | None = None
    sense: str | None = None


@dataclass(frozen=True, eq=False)
class MetricVector:
    """Metric values per curve cutpoint; NaN where undefined."""

    values: NDArray[np.float64]
    metric_name: str


# --- formulas ---------------------------------------------------------------
# Each formula takes float arrays (tp, fp, tn, fn) and the MetricSpec.

def _se(tp, fp, tn, fn, spec):
    return tp / (tp + fn)


def _sp(tp, fp, tn, fn, spec):
    return tn / (tn + fp)


def _fpr(tp, fp, tn, fn, spec):
    return fp / (fp + tn)


def _fnr(tp, fp, tn, fn, spec):
    return fn / (tp + fn)


def _accuracy(tp, fp, tn, fn, spec):
    return (tp + tn) / (tp + fp + tn + fn)


def _ppv(tp, fp, tn, fn, spec):
    return tp / (tp + fp)


def _npv(tp, fp, tn, fn, spec):
    return tn / (tn + fn)


def _cohens_kappa(tp, fp, tn, fn, spec):
    n = tp + fp + tn + fn
    observed = (tp + tn) / n
    chance = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    return (observed - chance) / (1.0 - chance)


def _p_chisquared(tp, fp, tn, fn, spec):
    n = tp + fp + tn + fn
    stat = (
        n * (tp * tn - fp * fn) ** 2
        / ((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    )
    # survival function of chi-squared with 1 df via the incomplete gamma
    return gammaincc(0.5, stat / 2.0)


def _misclassification_cost(tp, fp, tn, fn, spec):
    return spec.cost_fp * fp + spec.cost_fn * fn


def _total_utility(tp, fp, tn, fn, spec):
    return (
        spec.utility_tp * tp
        + spec.utility_tn * tn
        - spec.cost_fp * fp
        - spec.cost_fn * fn
    )


@dataclass(frozen=True)
class _MetricDef:
    fn: Callable[..., NDArray[np.float64]]
    sense: str
    requires: tuple[str, ...] = ()


_REGISTRY: dict[str, _MetricDef] = {
    "tp": _MetricDef(lambda tp, fp, tn, fn, s: tp, MAXIMIZE),
    "fp": _MetricDef(lambda tp, fp, tn, fn, s: fp, MINIMIZE),
    "tn": _MetricDef(lambda tp, fp, tn, fn, s: tn, MAXIMIZE),
    "fn": _MetricDef(lambda tp, fp, tn, fn, s: fn, MINIMIZE),
    "tpr": _MetricDef(_se, MAXIMIZE),
    "fpr": _MetricDef(_fpr, MINIMIZE),
    "tnr": _MetricDef(_sp, MAXIMIZE),
    "fnr": _MetricDef(_fnr, MINIMIZE),
    "plr": _MetricDef(lambda tp, fp, tn, fn, s: _se(tp, fp, tn, fn, s) / _fpr(tp, fp, tn, fn, s), MAXIMIZE),
    "nlr": _MetricDef(lambda tp, fp, tn, fn, s: _fnr(tp, fp, tn, fn, s) / _sp(tp, fp, tn, fn, s), MINIMIZE),
    "accuracy": _MetricDef(_accuracy, MAXIMIZE),
    "sensitivity": _MetricDef(_se, MAXIMIZE),
    "specificity": _MetricDef(_sp, MAXIMIZE),
    "sum_sens_spec": _MetricDef(lambda tp, fp, tn, fn, s: _se(tp, fp, tn, fn, s) + _sp(tp, fp, tn, fn, s), MAXIMIZE),
    "youden": _MetricDef(lambda tp, fp, tn, fn, s: _se(tp, fp, tn, fn, s) + _sp(tp, fp, tn, fn, s) - 1.0, MAXIMIZE),
    "abs_d_sens_spec": _MetricDef(lambda tp, fp, tn, fn, s: np.abs(_se(tp, fp, tn, fn, s) - _sp(tp, fp, tn, fn, s)), MINIMIZE),
    "prod_sens_spec": _MetricDef(lambda tp, fp, tn, fn, s: _se(tp, fp, tn, fn, s) * _sp(tp, fp, tn, fn, s), MAXIMIZE),
    "ppv": _MetricDef(_ppv, MAXIMIZE),
    "npv": _MetricDef(_npv, MAXIMIZE),
    "sum_ppv_npv": _MetricDef(lambda tp, fp, tn, fn, s: _ppv(tp, fp, tn, fn, s) + _npv(tp, fp, tn, fn, s), MAXIMIZE),
    "abs_d_ppv_npv": _MetricDef(lambda tp, fp, tn, fn, s: np.abs(_ppv(tp, fp, tn, fn, s) - _npv(tp, fp, tn, fn, s)), MINIMIZE),
    "prod_ppv_npv": _MetricDef(lambda tp, fp, tn, fn, s: _ppv(tp, fp, tn, fn, s) * _npv(tp, fp, tn, fn, s), MAXIMIZE),
    "roc01": _MetricDef(
        lambda tp, fp, tn, fn, s: np.sqrt(
            (1.0 - _se(tp, fp, tn, fn, s)) ** 2 + (1.0 - _sp(tp, fp, tn, fn, s)) ** 2
        ),
        MINIMIZE,
    ),
    "f1_score": _MetricDef(lambda tp, fp, tn, fn, s: 2.0 * tp / (2.0 * tp + fp + fn), MAXIMIZE),
    "cohens_kappa": _MetricDef(_cohens_kappa, MAXIMIZE),
    "p_chisquared": _MetricDef(_p_chisquared, MINIMIZE),
    "odds_ratio": _MetricDef(lambda tp, fp, tn, fn, s: (tp / fp) / (fn / tn), MAXIMIZE),
    "risk_ratio": _MetricDef(lambda tp, fp, tn, fn, s: _se(tp, fp, tn, fn, s) / _fpr(tp, fp, tn, fn, s), MAXIMIZE),
    "misclassification_cost": _MetricDef(_misclassification_cost, MINIMIZE, requires=("cost_fp", "cost_fn")),
    "total_utility": _MetricDef(_total_utility, MAXIMIZE, requires=("cost_fp", "cost_fn", "utility_tp", "utility_tn")),
    "false_omission_rate": _MetricDef(lambda tp, fp, tn, fn, s: fn / (tn + fn), MINIMIZE),
    "false_discovery_rate": _MetricDef(lambda tp, fp, tn, fn, s: fp / (tp + fp), MINIMIZE),
}

_ALIASES = {"recall": "sensitivity", "precision": "ppv", "F1_score": "f1_score"}

# constrained family: value of the main metric where the constraint holds, else 0
_CONSTRAINED: dict[str, tuple[str | None, str | None]] = {
    "metric_constrain": (None, None),  # main/constraint named on the MetricSpec
    "sens_constrain": ("sensitivity", "specificity"),
    "spec_constrain": ("specificity", "sensitivity"),
    "acc_constrain": ("accuracy", "sensitivity"),
}


def _canonical(metric_id: str) -> str:
    return _ALIASES.get(metric_id, metric_id)


def _base_values(metric_id: str, tp, fp, tn, fn, spec: MetricSpec) -> NDArray[np.float64]:
    definition = _REGISTRY[metric_id]
    missing = [p for p in definition.requires if getattr(spec, p) is None]
    if missing:
        raise ValueError(f"metric {metric_id!r} requires parameters: {', '.join(missing)}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(definition.fn(tp, fp, tn, fn, spec), dtype=np.float64)


def _resolve_constrained(spec: MetricSpec) -> tuple[str, str]:
    main, constraint = _CONSTRAINED[_canonical(spec.metric_id)]
    main = main or (spec.main_metric and _canonical(spec.main_metric))
    constraint = constraint or (spec.constrain_metric and _canonical(spec.constrain_metric))
    if not main or not constraint:
        raise ValueError("metric_constrain requires main_metric and constrain_metric")
    for name in (main, constraint):
        if name not in _REGISTRY:
            raise ValueError(f"unknown metric {name!r} in the constraint pair")
    if spec.min_constrain is None:
        raise ValueError(f"metric {spec.metric_id!r} requires min_constrain")
    return main, constraint


def _evaluate_arrays(spec: MetricSpec, tp, fp, tn, fn) -> NDArray[np.float64]:
    metric_id = _canonical(spec.metric_id)
    if metric_id in _CONSTRAINED:
        main, constraint = _resolve_constrained(spec)
        main_values = _base_values(main, tp, fp, tn, fn, spec)
        constraint_values = _base_values(constraint, tp, fp, tn, fn, spec)
        satisfied = constraint_values >= spec.min_constrain  # NaN compares False
        return np.where(satisfied, main_values, 0.0)
    if metric_id not in _REGISTRY:
        raise ValueError(f"unknown metric {spec.metric_id!r}")
    return _base_values(metric_id, tp, fp, tn, fn, spec)


def evaluate_metric(spec: MetricSpec, curve: RocCurve) -> MetricVector:
    """Evaluate the metric at every cutpoint of ``curve``.

    Returns
    -------
    MetricVector
        One value per curve point, aligned with ``curve.cutpoints``.
    """
    values = _evaluate_arrays(
        spec,
        curve.tp.astype(np.float64),
        curve.fp.astype(np.float64),
        curve.tn.astype(np.float64),
        curve.fn.astype(np.float64),
    )
    return MetricVector(values=values, metric_name=_canonical(spec.metric_id))


def evaluate_metric_at(spec: MetricSpec, counts: ConfusionCounts) -> float:
    """Scalar metric value at one confusion-count cell."""
    values = _evaluate_arrays(
        spec,
        np.array([counts.tp], dtype=np.float64),
        np.array([counts.fp], dtype=np.float64),
        np.array([counts.tn], dtype=np.float64),
        np.array([counts.fn], dtype=np.float64),
    )
    return float(values[0])


def metric_sense(spec: MetricSpec) -> str:
    """Optimization sense: the MetricSpec override or the registry default."""
    if spec.sense is not None:
        if spec.sense not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"unknown sense {spec.sense!r}")
        return spec.sense
    metric_id = _canonical(spec.metric_id)
    if metric_id in _CONSTRAINED:
        main, _ = _resolve_constrained(spec)
        return _REGISTRY[main].sense
    if metric_id not in _REGISTRY:
        raise ValueError(f"unknown metric {spec.metric_id!r}")
    return _REGISTRY[metric_id].sense


def best_cutpoint_indices(values: MetricVector | NDArray[np.float64], sense: str) -> NDArray[np.int64]:
    """All indices attaining the optimum among finite values.

    Raises
    ------
    NumericError
        No finite value exists ("metric undefined everywhere").
    """
    array = values.values if isinstance(values, MetricVector) else np.asarray(values, dtype=float)
    finite = np.isfinite(array)
    if not finite.any():
        raise NumericError("metric undefined everywhere on this curve")
    if sense not in (MAXIMIZE, MINIMIZE):
        raise ValueError(f"unknown sense {sense!r}")
    optimum = array[finite].max() if sense == MAXIMIZE else array[finite].min()
    return np.flatnonzero(finite & (array == optimum)).astype(np.int64)


def standard_metric_panel(counts: ConfusionCounts) -> dict[str, float]:
    """Fixed reporting panel evaluated at one cutpoint's counts."""
    panel = {}
    for name in ("accuracy", "sensitivity", "specificity", "youden", "ppv", "npv", "cohens_kappa"):
        panel[name] = evaluate_metric_at(MetricSpec(metric_id=name), counts)
    panel["tp"] = counts.tp
    panel["fp"] = counts.fp
    panel["tn"] = counts.tn
    panel["fn"] = counts.fn
    return panel


def canonical_metric_id(metric_id: str) -> str:
    """Resolve aliases; raise for names the registry does not know."""
    name = _canonical(metric_id)
    if name not in _REGISTRY and name not in _CONSTRAINED:
        raise ValueError(f"unknown metric {metric_id!r}")
    return name


def available_metrics() -> list[str]:
    """Sorted metric identifiers accepted by :class:`MetricSpec`."""
    return sorted(set(_REGISTRY) | set(_CONSTRAINED) | set(_ALIASES))
