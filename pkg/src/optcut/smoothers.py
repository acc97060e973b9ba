"""Smoothing machinery shared by the smoothing-based estimation methods.

Four independent tools live here: Gaussian-kernel CDF estimation with a
rule-of-thumb bandwidth, a cubic smoothing spline, local polynomial
regression with corrected-AIC span selection, and a low-rank penalized
regression spline tuned by generalized cross-validation.

The two spline fitters share one engine: a cubic B-spline basis with the
exact second-derivative penalty Gram matrix, assembled per knot interval
with two-point Gauss-Legendre quadrature (exact for cubics), solved as a
banded symmetric system.  All smoothers are linear in y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.interpolate import BSpline
from scipy.linalg import solveh_banded
from scipy.special import ndtr

from .errors import NumericError

__all__ = [
    "KernelCdf",
    "SplineFit",
    "LoessFit",
    "PenalizedSplineFit",
    "rule_of_thumb_bandwidth",
    "kernel_cdf",
    "fit_smoothing_spline",
    "fit_loess_aicc",
    "fit_penalized_spline_gcv",
]


# --- kernel CDF -------------------------------------------------------------


def rule_of_thumb_bandwidth(values: NDArray[np.float64]) -> float:
    """Rule-of-thumb kernel bandwidth 0.9 * min(s, iqr/1.34) * n^(-1/5).

    ``s`` is the n-1 sample standard deviation and the interquartile range
    uses linearly interpolated quantiles.  When the IQR collapses to zero
    on tie-heavy data, the spread falls back to ``s`` so that a usable
    bandwidth survives; all-identical values are an error.

    Raises
    ------
    NumericError
        Fewer than two values, or zero spread.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise NumericError("degenerate bandwidth: need at least two values")
    s = float(v.std(ddof=1))
    if s == 0.0:
        raise NumericError("degenerate bandwidth: zero spread")
    q25, q75 = np.quantile(v, [0.25, 0.75])
    spread = min(s, float(q75 - q25) / 1.34)
    if spread == 0.0:
        spread = s
    return 0.9 * spread * v.size ** (-0.2)


@dataclass(frozen=True, eq=False)
class KernelCdf:
    """Mixture-of-Gaussian-CDFs estimator: F(t) = mean(ndtr((t - v_i)/h))."""

    values: NDArray[np.float64]
    h: float

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise NumericError(f"kernel bandwidth must be positive, got {self.h}")

    def __call__(self, t) -> NDArray[np.float64] | float:
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty(t_arr.size, dtype=np.float64)
        step = max(1, 2**22 // max(self.values.size, 1))  # cap the broadcast buffer
        for start in range(0, t_arr.size, step):
            block = t_arr[start:start + step, None]
            out[start:start + step] = ndtr((block - self.values[None, :]) / self.h).mean(axis=1)
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return float(out[0])
        return out


def kernel_cdf(values: NDArray[np.float64], h: float) -> KernelCdf:
    """Smoothed CDF of ``values`` with bandwidth ``h`` (> 0)."""
    return KernelCdf(values=np.asarray(values, dtype=np.float64), h=float(h))


# --- shared penalized B-spline engine ---------------------------------------


def _clean_xy(x, y):
    """Sort, drop non-finite rows, average y over duplicate x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    xd, inverse = np.unique(x, return_inverse=True)
    counts = np.bincount(inverse)
    yd = np.bincount(inverse, weights=y) / counts
    return xd, yd


def _clamped_knots(sites: NDArray[np.float64]) -> NDArray[np.float64]:
    """Cubic clamped knot vector with interior knots at sites[1:-1]."""
    return np.concatenate([[sites[0]] * 4, sites[1:-1], [sites[-1]] * 4])


def _design(x: NDArray[np.float64], t: NDArray[np.float64]) -> sparse.csr_matrix:
    return BSpline.design_matrix(x, t, 3).tocsr()


def _second_derivative_map(t: NDArray[np.float64]) -> sparse.csr_matrix:
    """Coefficient map from cubic coefficients to those of the 2nd derivative."""
    q = t.size - 4
    span1 = t[4:q + 3] - t[1:q]        # t[i+4]-t[i+1], i = 0..q-2
    span2 = t[4:q + 2] - t[2:q]        # t[i+4]-t[i+2], i = 0..q-3
    with np.errstate(divide="ignore"):
        d1 = np.where(span1 > 0, 3.0 / np.where(span1 > 0, span1, 1.0), 0.0)
        d2 = np.where(span2 > 0, 2.0 / np.where(span2 > 0, span2, 1.0), 0.0)
    a1 = sparse.diags([-d1, d1], offsets=[0, 1], shape=(q - 1, q))
    a2 = sparse.diags([-d2, d2], offsets=[0, 1], shape=(q - 2, q - 1))
    return (a2 @ a1).tocsr()


def _penalty_gram(t: NDArray[np.float64]) -> sparse.csr_matrix:
    """Exact Gram matrix of the second-derivative penalty on the knot range.

    The integrand is piecewise quadratic, so two Gauss-Legendre points per
    knot interval integrate it exactly.
    """
    breaks = np.unique(t)
    mid = (breaks[1:] + breaks[:-1]) / 2.0
    half = (breaks[1:] - breaks[:-1]) / 2.0
    offset = half / np.sqrt(3.0)
    points = np.concatenate([mid - offset, mid + offset])
    weights = np.concatenate([half, half])

    deriv_map = _second_derivative_map(t)
    g = BSpline.design_matrix(points, t[2:-2], 1).tocsr() @ deriv_map
    return (g.T @ sparse.diags(weights) @ g).tocsr()


def _solve_banded_spd(a: sparse.spmatrix, rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Cholesky solve of a symmetric positive-definite 7-banded system.

    Two steps of iterative refinement keep the penalty-null-space
    components accurate when the penalty weight dwarfs the design term.
    """
    q = a.shape[0]
    ab = np.zeros((4, q))
    for d in range(4):
        ab[3 - d, d:] = a.diagonal(d)
    solution = solveh_banded(ab, rhs, lower=False)
    best_norm = float(np.linalg.norm(rhs - a @ solution))
    for _ in range(2):
        residual = rhs - a @ solution
        candidate = solution + solveh_banded(ab, residual, lower=False)
        norm = float(np.linalg.norm(rhs - a @ candidate))
        if norm >= best_norm:
            break
        solution, best_norm = candidate, norm
    return solution


@dataclass(frozen=True, eq=False)
class SplineFit:
    """Cubic smoothing-spline fit.

    ``fitted`` aligns with the distinct-x sites actually used (``x_fit``);
    ``rss`` and ``penalty`` give the two terms of the objective
    rss + lam * penalty, with penalty the exact integral of the squared
    second derivative.
    """

    knots: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    lam: float
    x_fit: NDArray[np.float64]
    fitted: NDArray[np.float64]
    rss: float
    penalty: float
    spline: Callable[[NDArray[np.float64]], NDArray[np.float64]]

    def __call__(self, t):
        return self.spline(t)


def _greville(t: NDArray[np.float64]) -> NDArray[np.float64]:
    """Knot averages at which a cubic B-spline basis reproduces the identity."""
    q = t.size - 4
    return (t[1:q + 1] + t[2:q + 2] + t[3:q + 3]) / 3.0


def _penalized_fit(xd, yd, sites, lam):
    """Solve min ||y - B c||^2 + lam * c' Omega c on the given knot sites."""
    t = _clamped_knots(sites)
    b = _design(xd, t)
    omega = _penalty_gram(t)
    btb = (b.T @ b).tocsr()
    rhs = b.T @ yd
    ratio = _trace_ratio(btb, omega)

    if lam > 0 and lam / ratio >= 1e9:
        # penalty dominates beyond double precision; the minimizer equals
        # the least-squares line to within O(1/lam)
        slope, intercept = np.polyfit(xd, yd, 1)
        coef = slope * _greville(t) + intercept
        fitted = slope * xd + intercept
        rss = float(((yd - fitted) ** 2).sum())
        return t, coef, fitted, rss, 0.0

    effective = lam if lam > 0 else 1e-12 * ratio  # rank-deficient unpenalized
    ridge = 0.0
    for _ in range(6):
        try:
            system = btb + effective * omega
            if ridge > 0:
                system = system + ridge * sparse.identity(btb.shape[0])
            coef = _solve_banded_spd(system.tocsr(), rhs)
            break
        except np.linalg.LinAlgError:
            scale = float(btb.diagonal().max() + effective * omega.diagonal().max())
            ridge = max(ridge * 100.0, 1e-15 * scale)
    else:
        raise NumericError("spline system not positive definite")

    fitted = b @ coef
    rss = float(((yd - fitted) ** 2).sum())
    penalty = float(coef @ (omega @ coef))
    return t, coef, fitted, rss, penalty


def _trace_ratio(btb: sparse.spmatrix, omega: sparse.spmatrix) -> float:
    tr_b = float(btb.diagonal().sum())
    tr_o = float(omega.diagonal().sum())
    if tr_o <= 0:
        raise NumericError("degenerate penalty: knot range has zero length")
    return tr_b / tr_o


def fit_smoothing_spline(
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    smoothing: float = 1.0,
    knots: int | None = None,
    lam: float | None = None,
) -> SplineFit:
    """Cubic smoothing spline minimizing sum (y - g(x))^2 + lam * int g''^2.

    Parameters
    ----------
    x, y : array_like
        Sites and responses; non-finite rows are dropped, duplicate x
        averaged.  Needs at least 4 distinct sites.
    smoothing : float, default 1.0
        Spar-style tuning constant, mapped to the penalty weight by
        lam = r * 256**(3*smoothing - 1) with r the ratio of the design
        to penalty Gram traces.  The map is monotone in ``smoothing``.
    knots : int, optional
        Cap on the number of knot sites; quantile-thinned when fewer than
        the distinct-x count.  Default uses every distinct x.
    lam : float, optional
        Direct penalty weight, bypassing ``smoothing``.

    Raises
    ------
    NumericError
        Fewer than 4 distinct finite sites ("insufficient support").
    """
    xd, yd = _clean_xy(x, y)
    if xd.size < 4:
        raise NumericError(f"insufficient support: {xd.size} distinct sites, need 4")

    sites = xd
    if knots is not None and knots < xd.size:
        if knots < 4:
            raise NumericError("insufficient support: need at least 4 knots")
        sites = np.unique(np.quantile(xd, np.linspace(0.0, 1.0, knots)))

    if lam is None:
        t_probe = _clamped_knots(sites)
        b = _design(xd, t_probe)
        r = _trace_ratio((b.T @ b).tocsr(), _penalty_gram(t_probe))
        lam = r * 256.0 ** (3.0 * smoothing - 1.0)

    t, coef, fitted, rss, penalty = _penalized_fit(xd, yd, sites, lam)
    return SplineFit(
        knots=t,
        coefficients=coef,
        lam=float(lam),
        x_fit=xd,
        fitted=fitted,
        rss=rss,
        penalty=penalty,
        spline=BSpline(t, coef, 3, extrapolate=True),
    )


# --- penalized regression spline with GCV -----------------------------------


@dataclass(frozen=True, eq=False)
class PenalizedSplineFit:
    """Low-rank penalized spline with GCV-chosen penalty weight."""

    basis_dim: int
    lam: float
    gcv: float
    edf: float
    x_fit: NDArray[np.float64]
    fitted: NDArray[np.float64]
    spline: Callable[[NDArray[np.float64]], NDArray[np.float64]]

    def __call__(self, t):
        return self.spline(t)


def fit_penalized_spline_gcv(
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    basis_dim: int = 10,
) -> PenalizedSplineFit:
    """Penalized cubic regression spline, penalty weight minimizing GCV.

    The basis has ``basis_dim`` functions (reduced when fewer distinct x
    are available) on quantile-spaced knots over normalized x, so fits are
    invariant to affine rescaling of x.  GCV(lam) =
    n * rss / (n - edf)^2 is minimized over a two-stage log-spaced grid;
    ties resolve to the smallest penalty.

    Raises
    ------
    NumericError
        Fewer than 2 distinct sites, or a degenerate basis.
    """
    xd, yd = _clean_xy(x, y)
    if xd.size < 2:
        raise NumericError("insufficient support: need at least 2 distinct sites")
    q = max(4, min(int(basis_dim), xd.size))

    lo, hi = xd[0], xd[-1]
    u = (xd - lo) / (hi - lo)
    sites = np.unique(np.quantile(u, np.linspace(0.0, 1.0, q - 2)))
    if sites.size < 2:
        raise NumericError("degenerate basis: knot sites collapsed")
    t = _clamped_knots(sites)
    b = _design(u, t).toarray()
    omega = _penalty_gram(t).toarray()
    btb = b.T @ b
    rhs = b.T @ yd
    n = xd.size
    r = _trace_ratio(sparse.csr_matrix(btb), sparse.csr_matrix(omega))

    def score(lam: float) -> tuple[float, float, NDArray[np.float64]]:
        a = btb + lam * omega
        try:
            coef = np.linalg.solve(a, rhs)
            influence = np.linalg.solve(a, btb)
        except np.linalg.LinAlgError as exc:
            raise NumericError("degenerate basis: singular spline system") from exc
        edf = float(np.trace(influence))
        rss = float(((yd - b @ coef) ** 2).sum())
        if n - edf <= 0:
            return np.inf, edf, coef
        return n * rss / (n - edf) ** 2, edf, coef

    grid = np.linspace(-8.0, 8.0, 33)
    scores = [score(r * 10.0 ** g)[0] for g in grid]
    g_best = grid[int(np.argmin(scores))]
    fine = np.linspace(g_best - 0.5, g_best + 0.5, 21)
    fine_scores = [score(r * 10.0 ** g)[0] for g in fine]
    g_best = fine[int(np.argmin(fine_scores))]

    lam = r * 10.0 ** g_best
    gcv, edf, coef = score(lam)
    scale = hi - lo
    # express the fit back on the raw-x axis
    raw_t = t * scale + lo
    raw_coef = coef
    return PenalizedSplineFit(
        basis_dim=t.size - 4,
        lam=float(lam),
        gcv=float(gcv),
        edf=edf,
        x_fit=xd,
        fitted=b @ coef,
        spline=BSpline(raw_t, raw_coef, 3, extrapolate=True),
    )


# --- local polynomial regression with AICc span selection -------------------


@dataclass(frozen=True, eq=False)
class LoessFit:
    """Tricube-weighted local polynomial fit at the selected span.

    ``aicc_by_span`` keeps the criterion over the whole grid; the selected
    span attains its minimum, lowest span winning ties.
    """

    span: float
    degree: int
    x_fit: NDArray[np.float64]
    fitted: NDArray[np.float64]
    aicc_by_span: dict[float, float]


_SPAN_GRID = np.round(0.2 + 0.05 * np.arange(17), 10)


def _loess_pass(xd, yd, span, degree, order):
    """One span evaluation: fitted values and the smoother-matrix trace."""
    n = xd.size
    k = min(n, max(degree + 1, int(np.ceil(span * n))))
    window = order[:, :k]                                   # (n, k) neighbor indices
    xw = xd[window]
    dist = np.abs(xw - xd[:, None])
    dmax = dist[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(dmax[:, None] > 0, dist / np.where(dmax[:, None] > 0, dmax[:, None], 1.0), 0.0)
    w = np.clip(1.0 - u**3, 0.0, None) ** 3
    w[dmax == 0] = 1.0

    centered = xw - xd[:, None]
    design = np.stack([centered**p for p in range(degree + 1)], axis=2)  # (n, k, p+1)
    wd = design * w[:, :, None]
    normal = np.einsum("nkp,nkq->npq", wd, design)          # (n, p+1, p+1)
    inv = np.linalg.pinv(normal)
    rows = np.einsum("nq,nkq->nk", inv[:, 0, :], wd)        # smoother rows, (n, k)
    fitted = np.einsum("nk,nk->n", rows, yd[window])
    self_pos = window == np.arange(n)[:, None]
    trace = float(rows[self_pos].sum())
    return fitted, trace


def fit_loess_aicc(
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    degree: int = 1,
) -> LoessFit:
    """Local polynomial regression with the span chosen by corrected AIC.

    Spans 0.2 to 1.0 in 0.05 steps are evaluated with tricube weights;
    the criterion is log(rss/n) + 2*(trace+1)/(n - trace - 2), infinite
    when the denominator is non-positive.  Lowest span wins ties.

    Raises
    ------
    NumericError
        degree outside {1, 2}, fewer than degree+2 distinct sites, or no
        span yielding a usable fit.
    """
    if degree not in (1, 2):
        raise NumericError(f"loess degree must be 1 or 2, got {degree}")
    xd, yd = _clean_xy(x, y)
    if xd.size < degree + 2:
        raise NumericError(
            f"insufficient support: {xd.size} distinct sites, need {degree + 2}"
        )
    n = xd.size

    order = np.argsort(np.abs(xd[None, :] - xd[:, None]), axis=1, kind="stable")
    fits: dict[float, NDArray[np.float64]] = {}
    aicc: dict[float, float] = {}
    for span in _SPAN_GRID:
        fitted, trace = _loess_pass(xd, yd, float(span), degree, order)
        if not np.isfinite(fitted).all():
            aicc[float(span)] = np.inf
            continue
        rss = float(((yd - fitted) ** 2).sum())
        denom = n - trace - 2.0
        if denom <= 0:
            aicc[float(span)] = np.inf
            continue
        with np.errstate(divide="ignore"):
            aicc[float(span)] = float(np.log(rss / n) + 2.0 * (trace + 1.0) / denom)
        fits[float(span)] = fitted

    if not fits:
        raise NumericError("loess failed on every span in the grid")
    best = min(fits, key=lambda s: (aicc[s], s))
    return LoessFit(
        span=best,
        degree=degree,
        x_fit=xd,
        fitted=fits[best],
        aicc_by_span=aicc,
    )
