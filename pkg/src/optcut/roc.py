"""ROC curve construction and direction semantics.

The curve builder follows the sort-and-cumulative-sum scheme: observations
are ordered by predictor value, the positive indicator is cumulatively
summed, and tied values collapse to one point.  A sentinel threshold under
which every observation is classified negative anchors the curve at
(fpr, tpr) = (0, 0).

All containers here are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import DataError

__all__ = [
    "Direction",
    "ConfusionCounts",
    "Sample",
    "Resolution",
    "RocCurve",
    "build_roc",
    "auc",
    "detect_direction_and_classes",
    "midpoint_cutpoint",
    "classify_counts",
]


class Direction(enum.Enum):
    """Orientation of the predictor-class dependency.

    GE: predictor >= cutpoint predicts the positive class.
    LE: predictor <= cutpoint predicts the positive class.
    """

    GE = ">="
    LE = "<="

    @property
    def symbol(self) -> str:
        return self.value

    @property
    def sentinel(self) -> float:
        """Threshold classifying every observation negative."""
        return np.inf if self is Direction.GE else -np.inf

    @classmethod
    def parse(cls, text: str) -> "Direction":
        key = str(text).strip().lower()
        mapping = {">=": cls.GE, "ge": cls.GE, "<=": cls.LE, "le": cls.LE}
        if key not in mapping:
            raise DataError(f"unknown direction {text!r}; expected one of >=, <=, ge, le")
        return mapping[key]


@dataclass(frozen=True)
class ConfusionCounts:
    """Confusion-matrix cells at a single threshold."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n_pos(self) -> int:
        return self.tp + self.fn

    @property
    def n_neg(self) -> int:
        return self.fp + self.tn

    @property
    def n(self) -> int:
        return self.n_pos + self.n_neg


@dataclass(frozen=True, eq=False)
class Sample:
    """Predictor values paired with resolved binary class labels.

    Parameters
    ----------
    x : ndarray of float
        Predictor values, all finite.
    y : ndarray of bool
        Positive-class indicator, aligned with ``x``.
    pos_class, neg_class : Any
        Original label values behind ``y``; kept for reporting.
    """

    x: NDArray[np.float64]
    y: NDArray[np.bool_]
    pos_class: Any
    neg_class: Any

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=bool)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 1 or y.shape != x.shape:
            raise DataError("predictor and class indicator must be aligned 1-d arrays")
        if x.size == 0:
            raise DataError("empty sample")
        if not np.isfinite(x).all():
            raise DataError("non-finite predictor values; drop or impute before analysis")
        n_pos = int(y.sum())
        if n_pos == 0 or n_pos == x.size:
            raise DataError("degenerate classes: need at least one positive and one negative")

    @classmethod
    def from_labels(
        cls,
        x: NDArray[np.float64],
        labels: NDArray[Any],
        pos_class: Any,
        neg_class: Any,
    ) -> "Sample":
        """Build a sample from raw labels and an already-resolved class pair."""
        labels = np.asarray(labels)
        is_pos = labels == pos_class
        is_neg = labels == neg_class
        if not bool((is_pos | is_neg).all()):
            extra = sorted({str(v) for v in np.unique(labels[~(is_pos | is_neg)])})
            raise DataError(f"labels outside the resolved class pair: {extra}")
        return cls(np.asarray(x, dtype=np.float64), is_pos, pos_class, neg_class)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def n_pos(self) -> int:
        return int(self.y.sum())

    @property
    def n_neg(self) -> int:
        return self.n - self.n_pos

    @property
    def x_pos(self) -> NDArray[np.float64]:
        return self.x[self.y]

    @property
    def x_neg(self) -> NDArray[np.float64]:
        return self.x[~self.y]

    def take(self, indices: NDArray[np.integer]) -> "Sample":
        """Resampled copy; raises if the draw lost a class."""
        return Sample(self.x[indices], self.y[indices], self.pos_class, self.neg_class)


@dataclass(frozen=True)
class Resolution:
    """Outcome of class/direction resolution, kept for audit."""

    direction: Direction
    pos_class: Any
    neg_class: Any
    direction_source: str
    class_source: str


# --- curve ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC curve in traversal order.

    ``cutpoints`` starts at the sentinel and then runs through the unique
    predictor values: descending for GE, ascending for LE.  Along the
    traversal (fpr, tpr) moves from (0, 0) to (1, 1).  Only ``tp`` and
    ``fp`` are stored; the remaining cells and rates derive from the fixed
    class margins, keeping memory at O(unique values).
    """

    cutpoints: NDArray[np.float64]
    tp: NDArray[np.int64]
    fp: NDArray[np.int64]
    n_pos: int
    n_neg: int
    direction: Direction
    metric_values: NDArray[np.float64] | None = None

    @property
    def n(self) -> int:
        return self.n_pos + self.n_neg

    @property
    def fn(self) -> NDArray[np.int64]:
        return self.n_pos - self.tp

    @property
    def tn(self) -> NDArray[np.int64]:
        return self.n_neg - self.fp

    @property
    def tpr(self) -> NDArray[np.float64]:
        return self.tp / self.n_pos

    @property
    def fpr(self) -> NDArray[np.float64]:
        return self.fp / self.n_neg

    @property
    def tnr(self) -> NDArray[np.float64]:
        return 1.0 - self.fpr

    @property
    def fnr(self) -> NDArray[np.float64]:
        return 1.0 - self.tpr

    def __len__(self) -> int:
        return int(self.cutpoints.size)

    def counts_at(self, index: int) -> ConfusionCounts:
        return ConfusionCounts(
            tp=int(self.tp[index]),
            fp=int(self.fp[index]),
            tn=int(self.tn[index]),
            fn=int(self.fn[index]),
        )

    def threshold_index(self, threshold: float) -> int:
        """Index of the curve point whose counts equal classification at ``threshold``.

        For GE that is the smallest cutpoint >= threshold; for LE the
        largest cutpoint <= threshold.  The sentinel guarantees existence.
        """
        if self.direction is Direction.GE:
            # cutpoints descending: [inf, x_u, ..., x_1]
            pos = np.searchsorted(self.cutpoints[::-1], threshold, side="left")
            return int(self.cutpoints.size - 1 - min(pos, self.cutpoints.size - 1))
        pos = np.searchsorted(self.cutpoints, threshold, side="right") - 1
        return int(max(pos, 0))

    def with_metric(self, values: NDArray[np.float64]) -> "RocCurve":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.cutpoints.shape:
            raise ValueError("metric vector length must match the cutpoint count")
        return replace(self, metric_values=values)


def build_roc(sample: Sample, direction: Direction) -> RocCurve:
    """Build the ROC curve of ``sample`` under ``direction``.

    Ties in the predictor collapse to a single point.  Runs in
    O(n log n) time and O(u) extra space beyond the sort, with u the
    number of unique predictor values.

    Parameters
    ----------
    sample : Sample
    direction : Direction

    Returns
    -------
    RocCurve
        ``len(curve)`` equals the unique-value count plus one sentinel.
    """
    x, y = sample.x, sample.y
    order = np.argsort(x, kind="quicksort")  # ties collapse, stability irrelevant
    if direction is Direction.GE:
        order = order[::-1]
    xs = x[order]
    cum_tp = np.cumsum(y[order], dtype=np.int64)

    last_of_run = np.empty(xs.size, dtype=bool)
    np.not_equal(xs[1:], xs[:-1], out=last_of_run[:-1])
    last_of_run[-1] = True
    boundary = np.flatnonzero(last_of_run)

    tp = np.concatenate(([0], cum_tp[boundary]))
    seen = np.concatenate(([0], boundary + 1))
    fp = seen - tp
    cutpoints = np.concatenate(([direction.sentinel], xs[boundary]))

    return RocCurve(
        cutpoints=cutpoints,
        tp=tp,
        fp=fp,
        n_pos=sample.n_pos,
        n_neg=sample.n_neg,
        direction=direction,
    )


def auc(curve: RocCurve) -> float:
    """Area under the curve by the trapezoidal rule over (fpr, tpr).

    Equals the Mann-Whitney statistic with ties credited 1/2, hence is
    invariant under strictly increasing predictor transforms.
    """
    return float(np.trapezoid(curve.tpr, curve.fpr))


def classify_counts(sample: Sample, threshold: float, direction: Direction) -> ConfusionCounts:
    """Confusion counts from classifying ``sample`` directly at ``threshold``."""
    if direction is Direction.GE:
        pred = sample.x >= threshold
    else:
        pred = sample.x <= threshold
    tp = int(np.count_nonzero(pred & sample.y))
    fp = int(np.count_nonzero(pred & ~sample.y))
    return ConfusionCounts(
        tp=tp,
        fp=fp,
        tn=sample.n_neg - fp,
        fn=sample.n_pos - tp,
    )


# --- resolution -------------------------------------------------------------


def detect_direction_and_classes(
    x: NDArray[np.float64],
    labels: NDArray[Any],
    pos_class: Any = None,
    neg_class: Any = None,
    direction: Direction | None = None,
) -> Resolution:
    """Resolve the positive/negative class pair and the direction.

    Without hints the class with the higher median predictor becomes the
    positive class with direction GE.  Hints override detection for the
    hinted element only: a hinted direction picks the class pair that fits
    it, a hinted class pair picks the direction that fits the medians.
    Detection never depends on label ordering in the input.

    Parameters
    ----------
    x : ndarray of float
    labels : ndarray
        Raw class labels; exactly two distinct values.
    pos_class, neg_class : Any, optional
        Fix one or both classes.
    direction : Direction, optional
        Fix the direction.

    Returns
    -------
    Resolution
        Resolved triple plus the source ("hinted" or "detected") of each
        element.

    Raises
    ------
    DataError
        Not exactly two classes, a hint naming an absent label, or equal
        class medians when a detection decision is required ("ambiguous
        direction").
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    classes = list(np.unique(labels))
    if len(classes) != 2:
        raise DataError(f"need exactly two classes, found {len(classes)}")

    for hint, name in ((pos_class, "pos_class"), (neg_class, "neg_class")):
        if hint is not None and hint not in classes:
            raise DataError(f"{name} {hint!r} not present in the class labels")
    if pos_class is not None and neg_class is not None and pos_class == neg_class:
        raise DataError("pos_class and neg_class must differ")

    if pos_class is not None:
        neg = neg_class if neg_class is not None else next(c for c in classes if c != pos_class)
        pos = pos_class
        class_source = "hinted"
    elif neg_class is not None:
        pos = next(c for c in classes if c != neg_class)
        neg = neg_class
        class_source = "hinted"
    else:
        pos = neg = None
        class_source = "detected"

    def median_of(cls: Any) -> float:
        values = x[labels == cls]
        if values.size == 0:
            raise DataError(f"class {cls!r} has no observations")
        return float(np.median(values))

    if class_source == "detected":
        m0, m1 = median_of(classes[0]), median_of(classes[1])
        if m0 == m1:
            raise DataError("ambiguous direction: class medians are equal; hint classes or direction")
        hi, lo = (classes[1], classes[0]) if m1 > m0 else (classes[0], classes[1])
        if direction is None:
            resolved_dir, dir_source = Direction.GE, "detected"
            pos, neg = hi, lo
        else:
            resolved_dir, dir_source = direction, "hinted"
            pos, neg = (hi, lo) if direction is Direction.GE else (lo, hi)
    else:
        if direction is None:
            mp, mn = median_of(pos), median_of(neg)
            if mp == mn:
                raise DataError("ambiguous direction: class medians are equal; hint the direction")
            resolved_dir = Direction.GE if mp > mn else Direction.LE
            dir_source = "detected"
        else:
            resolved_dir, dir_source = direction, "hinted"

    return Resolution(
        direction=resolved_dir,
        pos_class=pos,
        neg_class=neg,
        direction_source=dir_source,
        class_source=class_source,
    )


def midpoint_adjust(
    chosen: float, unique_values: NDArray[np.float64], direction: Direction
) -> float:
    """Shift ``chosen`` to the midpoint toward its neighbor in ``unique_values``.

    For GE the midpoint averages ``chosen`` with the next lower unique
    value, for LE with the next higher one; classification of the observed
    sample is unchanged either way.  Without a neighbor on that side the
    cutpoint is returned as is.  ``unique_values`` must be sorted ascending.

    Raises
    ------
    ValueError
        ``chosen`` is not in ``unique_values``.
    """
    uniq = np.asarray(unique_values, dtype=np.float64)
    i = int(np.searchsorted(uniq, chosen))
    if i >= uniq.size or uniq[i] != chosen:
        raise ValueError(f"cutpoint {chosen!r} is not in the candidate set")
    if direction is Direction.GE:
        if i == 0:
            return float(chosen)
        return float((uniq[i - 1] + chosen) / 2.0)
    if i == uniq.size - 1:
        return float(chosen)
    return float((uniq[i + 1] + chosen) / 2.0)


def midpoint_cutpoint(chosen: float, sample: Sample, direction: Direction) -> float:
    """``midpoint_adjust`` against the sample's observed unique values."""
    return midpoint_adjust(chosen, np.unique(sample.x), direction)
