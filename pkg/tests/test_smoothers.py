"""Smoother tests: bandwidth arithmetic, kernel CDF quadrature, spline
objective optimality, LOESS criterion selection."""

from __future__ import annotations

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import integrate, sparse
from scipy.interpolate import BSpline
from scipy.sparse.linalg import spsolve

from optcut.errors import NumericError
from optcut.smoothers import (
    _SPAN_GRID,
    _loess_pass,
    fit_loess_aicc,
    fit_penalized_spline_gcv,
    fit_smoothing_spline,
    kernel_cdf,
    rule_of_thumb_bandwidth,
)


@pytest.fixture
def rng():
    return np.random.default_rng(11)


class TestBandwidth:
    def test_arithmetic_oracle_0_to_99(self):
        v = np.arange(100.0)
        s = v.std(ddof=1)
        iqr = np.quantile(v, 0.75) - np.quantile(v, 0.25)
        want = 0.9 * min(s, iqr / 1.34) * 100 ** (-0.2)
        got = rule_of_thumb_bandwidth(v)
        assert got == pytest.approx(want, rel=1e-14)
        assert 10.3 < got < 10.5

    def test_two_point_regression_value(self):
        # freezes the quantile convention: iqr of {0,1} is 0.5 under
        # linear interpolation, so the iqr branch wins over s=0.7071
        got = rule_of_thumb_bandwidth(np.array([0.0, 1.0]))
        assert got == pytest.approx(0.29234906976362374, rel=1e-12)

    def test_scale_homogeneity(self, rng):
        v = rng.normal(3, 2, 50)
        for k in (0.01, 7.0, 1234.5):
            assert rule_of_thumb_bandwidth(k * v) == pytest.approx(
                k * rule_of_thumb_bandwidth(v), rel=1e-12
            )

    def test_zero_iqr_falls_back_to_sd(self):
        v = np.array([0.0] * 8 + [1.0, 2.0])  # iqr 0, sd > 0
        s = v.std(ddof=1)
        assert rule_of_thumb_bandwidth(v) == pytest.approx(0.9 * s * v.size ** (-0.2))

    def test_zero_spread_rejected(self):
        with pytest.raises(NumericError, match="zero spread"):
            rule_of_thumb_bandwidth(np.full(10, 3.3))

    def test_single_value_rejected(self):
        with pytest.raises(NumericError, match="at least two"):
            rule_of_thumb_bandwidth(np.array([1.0]))


class TestKernelCdf:
    def test_single_value_half_at_center(self):
        f = kernel_cdf(np.array([2.5]), h=0.7)
        assert f(2.5) == pytest.approx(0.5)

    def test_symmetric_values_half_at_zero(self):
        f = kernel_cdf(np.array([-3.0, -1.0, 1.0, 3.0]), h=1.1)
        assert f(0.0) == pytest.approx(0.5)

    def test_matches_density_quadrature(self, rng):
        """CDF equals the integral of the Gaussian-mixture density."""
        values = rng.normal(0, 2, 10)
        h = 0.8

        def density(z):
            return np.mean(np.exp(-0.5 * ((z - values) / h) ** 2)) / (h * np.sqrt(2 * np.pi))

        f = kernel_cdf(values, h)
        for t in rng.uniform(-6, 6, 20):
            want, err = integrate.quad(density, -30, t, limit=200)
            assert f(float(t)) == pytest.approx(want, abs=1e-8), f"query {t}"

    def test_non_decreasing_on_dense_grid(self, rng):
        f = kernel_cdf(rng.normal(0, 1, 40), h=0.3)
        grid = np.linspace(-5, 5, 1500)
        assert (np.diff(f(grid)) >= 0).all()

    def test_limits(self, rng):
        values = rng.uniform(0, 1, 15)
        f = kernel_cdf(values, h=0.1)
        assert f(-10.0) == pytest.approx(0.0, abs=1e-12)
        assert f(11.0) == pytest.approx(1.0, abs=1e-12)

    def test_vector_query(self, rng):
        f = kernel_cdf(rng.normal(size=8), h=0.5)
        out = f(np.array([-1.0, 0.0, 1.0]))
        assert out.shape == (3,)

    def test_nonpositive_bandwidth_rejected(self):
        with pytest.raises(NumericError, match="positive"):
            kernel_cdf(np.array([1.0, 2.0]), h=0.0)


class TestSmoothingSpline:
    @pytest.mark.parametrize("smoothing", [0.0, 1.0, 2.0])
    def test_linear_reproduction_spar(self, smoothing):
        x = np.linspace(0, 9, 10)
        y = 2.5 * x - 1.0
        fit = fit_smoothing_spline(x, y, smoothing=smoothing)
        assert np.abs(fit.fitted - y).max() < 1e-9

    @pytest.mark.parametrize("lam", [1e-3, 1.0, 1e3, 1e9])
    def test_linear_reproduction_lam(self, lam):
        x = np.linspace(-4, 4, 17)
        y = -0.3 * x + 2.0
        fit = fit_smoothing_spline(x, y, lam=lam)
        assert np.abs(fit.fitted - y).max() < 1e-9

    def test_large_lam_approaches_least_squares_line(self, rng):
        x = np.linspace(0, 5, 40)
        y = np.sin(x) + rng.normal(0, 0.3, 40)
        fit = fit_smoothing_spline(x, y, lam=1e12)
        line = np.polyval(np.polyfit(x, y, 1), x)
        assert np.abs(fit.fitted - line).max() < 1e-6

    def test_interpolates_at_zero_lam(self, rng):
        x = np.linspace(0, 6, 25)
        y = np.cos(x) + rng.normal(0, 0.1, 25)
        fit = fit_smoothing_spline(x, y, lam=0.0)
        assert np.abs(fit.fitted - y).max() < 1e-6

    def test_objective_matches_discretized_reference(self, rng):
        """Fit is optimal for the finite-difference version of the objective.

        Both candidate solutions are scored under the same discretized
        objective; the reference minimizer solves it exactly, so the fit
        may not beat it and must come within 1e-6.
        """
        m, sub, lam = 30, 80, 1e-4
        x = np.linspace(0, 3, m)
        y = np.sin(2 * x) + 0.1 * rng.normal(size=m)
        big = (m - 1) * sub + 1
        grid = np.linspace(0, 3, big)
        dz = grid[1] - grid[0]
        sel = sparse.csr_matrix(
            (np.ones(m), (np.arange(m), np.arange(0, big, sub))), shape=(m, big)
        )
        diff2 = sparse.diags([1, -2, 1], [0, 1, 2], shape=(big - 2, big))
        system = (sel.T @ sel + (lam / dz**3) * (diff2.T @ diff2)).tocsc()
        g_ref = spsolve(system, sel.T @ y)

        def discrete_objective(g):
            return float(((y - sel @ g) ** 2).sum() + lam / dz**3 * ((diff2 @ g) ** 2).sum())

        fit = fit_smoothing_spline(x, y, lam=lam)
        gap = discrete_objective(fit.spline(grid)) - discrete_objective(g_ref)
        assert -1e-9 < gap < 1e-6

    def test_linearity_in_y(self, rng):
        x = np.linspace(0, 4, 30)
        y = rng.normal(size=30)
        base = fit_smoothing_spline(x, y, smoothing=1.0).fitted
        scaled = fit_smoothing_spline(x, 3.5 * y - 2.0, smoothing=1.0).fitted
        assert np.abs(scaled - (3.5 * base - 2.0)).max() < 1e-8

    def test_spar_map_regression_value(self):
        x = np.linspace(0, 9, 10)
        y = np.array([0.0, 0.8, 1.2, 1.9, 2.4, 2.2, 1.7, 1.1, 0.6, 0.2])
        fit = fit_smoothing_spline(x, y, smoothing=1.0)
        assert fit.lam == pytest.approx(3959.935853379151, rel=1e-9)

    def test_spar_map_monotone(self):
        x = np.linspace(0, 9, 10)
        y = np.sin(x)
        lams = [fit_smoothing_spline(x, y, smoothing=s).lam for s in (0.0, 0.5, 1.0, 1.5)]
        assert lams == sorted(lams) and len(set(lams)) == 4

    def test_nan_rows_dropped_and_duplicates_averaged(self):
        x = np.array([0.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([0.0, 1.0, 3.0, 2.0, np.nan, 4.0, 5.0])
        fit = fit_smoothing_spline(x, y, lam=0.0)
        assert fit.x_fit.size == 5  # x=3 row dropped, duplicate x=1 merged
        i = int(np.searchsorted(fit.x_fit, 1.0))
        assert fit.fitted[i] == pytest.approx(2.0, abs=1e-6)  # mean of 1 and 3

    def test_insufficient_support_rejected(self):
        with pytest.raises(NumericError, match="insufficient support"):
            fit_smoothing_spline(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))

    def test_knot_thinning(self, rng):
        x = np.linspace(0, 10, 60)
        y = np.sin(x) + rng.normal(0, 0.1, 60)
        fit = fit_smoothing_spline(x, y, smoothing=0.5, knots=8)
        assert fit.knots.size == 8 + 6  # 8 sites -> 6 interior + 2*4 clamped ends
        assert np.isfinite(fit.fitted).all()

    def test_evaluator_matches_fitted(self, rng):
        x = np.linspace(0, 5, 20)
        y = rng.normal(size=20)
        fit = fit_smoothing_spline(x, y, smoothing=0.8)
        assert np.abs(fit(fit.x_fit) - fit.fitted).max() < 1e-10


class TestPenalizedSplineGcv:
    def test_linear_reproduction(self):
        x = np.linspace(0, 9, 10)
        y = 1.5 * x + 4.0
        fit = fit_penalized_spline_gcv(x, y)
        assert np.abs(fit.fitted - y).max() < 1e-9

    def test_rss_between_unpenalized_and_line(self, rng):
        x = np.linspace(0, 6, 200)
        y = np.sin(x) + rng.normal(0, 0.25, 200)
        fit = fit_penalized_spline_gcv(x, y, basis_dim=20)

        design = BSpline.design_matrix(x, fit.spline.t, 3).toarray()
        coef_ls, *_ = np.linalg.lstsq(design, y, rcond=None)
        rss_unpenalized = float(((y - design @ coef_ls) ** 2).sum())
        rss_line = float(((y - np.polyval(np.polyfit(x, y, 1), x)) ** 2).sum())
        rss_fit = float(((y - fit.fitted) ** 2).sum())
        assert rss_unpenalized < rss_fit < rss_line

    def test_affine_rescaling_of_x_is_neutral(self, rng):
        x = np.linspace(0, 6, 120)
        y = np.cos(x) + rng.normal(0, 0.2, 120)
        base = fit_penalized_spline_gcv(x, y, basis_dim=12)
        moved = fit_penalized_spline_gcv(x * 37.5 - 11.0, y, basis_dim=12)
        assert np.abs(base.fitted - moved.fitted).max() < 1e-6

    def test_basis_reduced_when_few_sites(self):
        x = np.arange(6.0)
        y = np.array([0.0, 1.0, 0.5, 1.5, 1.0, 2.0])
        fit = fit_penalized_spline_gcv(x, y, basis_dim=10)
        assert fit.basis_dim <= 8
        assert np.isfinite(fit.fitted).all()

    def test_degenerate_input_rejected(self):
        with pytest.raises(NumericError, match="insufficient support"):
            fit_penalized_spline_gcv(np.array([2.0, 2.0]), np.array([1.0, 1.0]))

    def test_gcv_score_is_local_minimum(self, rng):
        """Recomputed score cannot be improved by perturbing the penalty."""
        from optcut.smoothers import _penalty_gram

        x = np.linspace(0, 4, 80)
        y = np.sin(2 * x) + rng.normal(0, 0.3, 80)
        fit = fit_penalized_spline_gcv(x, y, basis_dim=12)

        u = (x - x.min()) / (x.max() - x.min())
        t_norm = (fit.spline.t - x.min()) / (x.max() - x.min())
        design = BSpline.design_matrix(u, t_norm, 3).toarray()
        gram = design.T @ design
        penalty = _penalty_gram(t_norm).toarray()

        def score(lam):
            system = gram + lam * penalty
            coef = np.linalg.solve(system, design.T @ y)
            edf = float(np.trace(np.linalg.solve(system, gram)))
            rss = float(((y - design @ coef) ** 2).sum())
            return x.size * rss / (x.size - edf) ** 2

        here = score(fit.lam)
        assert here == pytest.approx(fit.gcv, rel=1e-9)
        for factor in (0.05, 0.5, 2.0, 20.0):
            assert here <= score(fit.lam * factor) * (1 + 1e-9)


class TestLoess:
    def test_matches_reference_lowess_at_fixed_spans(self, rng):
        """Fixed-span fits agree with the statsmodels lowess implementation."""
        x = np.unique(rng.uniform(0, 10, 60))
        y = np.sin(x) + rng.normal(0, 0.2, x.size)
        order = np.argsort(np.abs(x[None, :] - x[:, None]), axis=1, kind="stable")
        for span in (0.3, 0.5, 0.8):
            mine, _ = _loess_pass(x, y, span, 1, order)
            theirs = sm.nonparametric.lowess(y, x, frac=span, it=0, return_sorted=False)
            assert np.abs(mine - theirs).max() < 1e-10, f"span {span}"

    def test_constant_y_fitted_constant(self):
        x = np.linspace(0, 1, 30)
        fit = fit_loess_aicc(x, np.full(30, 2.5))
        np.testing.assert_allclose(fit.fitted, 2.5, atol=1e-12)

    def test_smooth_quadratic_avoids_minimum_span(self):
        rng = np.random.default_rng(2024)
        x = np.linspace(-2, 2, 100)
        y = x**2 + rng.normal(0, 0.5, 100)
        fit = fit_loess_aicc(x, y)
        assert fit.span > _SPAN_GRID[0]

    def test_selected_span_is_criterion_argmin(self, rng):
        """AICc recomputed from a probed smoother matrix gives the same span."""
        x = np.unique(rng.uniform(0, 5, 45))
        n = x.size
        y = np.sin(1.5 * x) + rng.normal(0, 0.25, n)
        order = np.argsort(np.abs(x[None, :] - x[:, None]), axis=1, kind="stable")

        recomputed = {}
        for span in _SPAN_GRID:
            hat = np.column_stack([
                _loess_pass(x, np.eye(n)[:, j], float(span), 1, order)[0] for j in range(n)
            ])
            fitted = hat @ y
            trace = float(np.trace(hat))
            rss = float(((y - fitted) ** 2).sum())
            denom = n - trace - 2.0
            recomputed[float(span)] = (
                np.inf if denom <= 0 else float(np.log(rss / n) + 2 * (trace + 1) / denom)
            )

        fit = fit_loess_aicc(x, y, degree=1)
        best = min(recomputed, key=lambda s: (recomputed[s], s))
        assert fit.span == best
        for span, crit in recomputed.items():
            if np.isfinite(crit):
                assert fit.aicc_by_span[span] == pytest.approx(crit, rel=1e-9)

    def test_selected_criterion_is_minimal(self, rng):
        x = np.unique(rng.uniform(0, 8, 70))
        y = np.cos(x) + rng.normal(0, 0.3, x.size)
        fit = fit_loess_aicc(x, y)
        chosen = fit.aicc_by_span[fit.span]
        assert all(chosen <= v for v in fit.aicc_by_span.values())

    def test_degree_two(self, rng):
        x = np.linspace(0, 3, 50)
        y = x**2 - x + rng.normal(0, 0.1, 50)
        fit = fit_loess_aicc(x, y, degree=2)
        assert fit.degree == 2
        assert np.isfinite(fit.fitted).all()

    def test_linearity_in_y(self, rng):
        x = np.unique(rng.uniform(0, 5, 40))
        y = rng.normal(size=x.size)
        base = fit_loess_aicc(x, y)
        other = fit_loess_aicc(x, -2.0 * y + 0.7)
        same_span_fit, _ = _loess_pass(
            x, -2.0 * y + 0.7, base.span, 1,
            np.argsort(np.abs(x[None, :] - x[:, None]), axis=1, kind="stable"),
        )
        assert np.abs(same_span_fit - (-2.0 * base.fitted + 0.7)).max() < 1e-8

    def test_bad_degree_rejected(self):
        with pytest.raises(NumericError, match="degree"):
            fit_loess_aicc(np.arange(10.0), np.arange(10.0), degree=3)

    def test_too_few_points_rejected(self):
        with pytest.raises(NumericError, match="insufficient support"):
            fit_loess_aicc(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
