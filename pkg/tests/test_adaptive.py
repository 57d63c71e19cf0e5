import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bubbledates.adaptive import (
    BandwidthBoundaryWarning,
    BandwidthError,
    DegenerateWindowError,
    KernelSpec,
    adaptive_estimate,
    cv_bandwidth,
    kernel_variance,
    regime_residuals,
    regime_windows,
    resolve_bandwidth,
)
from bubbledates.estimators import BreakEstimates, sample_split
from bubbledates.model import Constant, DgpParams, OneBreak, generate_shocks, local_to_unity, simulate
from conftest import noiseless_path
from oracles import direct_loo_variance, gaussian


def bubble_path(seed, T=400, vol=Constant(1.0), y0=0.0):
    phi_a, phi_b = local_to_unity(6, 6, T)
    p = DgpParams.from_fractions(T, (0.4, 0.6, 0.7), phi_a, phi_b, 1 / 800, 1 / 800, y0)
    return simulate(p, generate_shocks(vol, T, seed))


class TestRegimeResiduals:
    def test_outside_windows_is_difference(self):
        y = bubble_path(3)
        est = BreakEstimates(400, 150, 245, 290)
        fit = regime_residuals(y, est)
        dy = np.diff(y)
        assert_array_equal(fit.residuals[:150], dy[:150])
        assert_array_equal(fit.residuals[290:], dy[290:])
        assert fit.window1 == (150, 245) and fit.window2 == (245, 290)
        assert not fit.fallback

    def test_noiseless_explosive_window(self):
        y = noiseless_path(100, 40, 60, 70, 1.08, 0.9, y0=2.0)
        fit = regime_residuals(y, BreakEstimates(100, 40, 60, 70))
        assert fit.delta1 == pytest.approx(0.08, rel=1e-9)
        assert fit.mu1 == pytest.approx(0.0, abs=1e-9)
        assert fit.delta2 == pytest.approx(-0.1, rel=1e-9)
        assert_allclose(fit.residuals[40:70], 0.0, atol=1e-9)

    def test_orthogonality(self):
        y = bubble_path(8, vol=OneBreak(1, 5, 0.2))
        est = sample_split(y)
        fit = regime_residuals(y, est)
        e = fit.residuals
        t = np.arange(1, 401)
        for a, b in (fit.window1, fit.window2):
            d = ((t > a) & (t <= b)).astype(float)
            for r in (d, d * y[:-1]):
                assert abs(e @ r) <= 1e-8 * np.linalg.norm(e) * np.linalg.norm(r)

    def test_window_decoupling(self):
        y = bubble_path(21)
        est = BreakEstimates(400, 160, 240, 280)
        fit = regime_residuals(y, est)
        # one joint 4-regressor solve with a generic solver
        t = np.arange(1, 401)
        d1 = ((t > 160) & (t <= 240)).astype(float)
        d2 = ((t > 240) & (t <= 280)).astype(float)
        X = np.column_stack([d1, d2, d1 * y[:-1], d2 * y[:-1]])
        beta = np.linalg.lstsq(X, np.diff(y), rcond=None)[0]
        assert_allclose([fit.mu1, fit.mu2, fit.delta1, fit.delta2], beta, rtol=1e-10)

    def test_collinear_window(self):
        y = np.full(101, 3.0)
        with pytest.raises(DegenerateWindowError):
            regime_residuals(y, BreakEstimates(100, 20, 50, 70))

    def test_fallback_windows(self):
        est = BreakEstimates(400, None, 240, None)
        w1, w2, fb = regime_windows(est)
        assert (w1, w2, fb) == ((20, 240), (240, 380), True)

    def test_fallback_drops_empty_window(self):
        y = bubble_path(4)
        fit = regime_residuals(y, BreakEstimates(400, 160, 380, None))
        assert fit.window2 is None and math.isnan(fit.delta2)
        assert_array_equal(fit.residuals[380:], np.diff(y)[380:])

    def test_needs_collapse_date(self):
        with pytest.raises(ValueError):
            regime_residuals(bubble_path(1), BreakEstimates(400, None, None, None))


class TestKernelVariance:
    def test_constant_residuals(self):
        v = kernel_variance(np.full(50, -1.5), KernelSpec(bandwidth=0.1))
        assert_allclose(v.sigma2, 2.25, rtol=1e-12)
        assert not v.floor_applied

    def test_three_point_hand_value(self):
        e = np.array([1.0, 2.0, 3.0])
        v = kernel_variance(e, KernelSpec(bandwidth=1 / 3))
        assert v.sigma2[0] == pytest.approx(4.9121, abs=5e-5)
        assert_allclose(v.sigma2, direct_loo_variance(e, 1 / 3, gaussian), rtol=1e-12)

    @pytest.mark.parametrize("kind,b", [("gaussian", 0.05), ("epanechnikov", 0.1)])
    def test_matches_direct_sum(self, rng, kind, b):
        from bubbledates.adaptive import kernel_function
        e = rng.standard_normal(120)
        k = lambda u: float(kernel_function(kind)(np.array(u)))  # noqa: E731
        v = kernel_variance(e, KernelSpec(kind, b))
        assert_allclose(v.sigma2, direct_loo_variance(e, b, k), rtol=1e-10)

    def test_convex_combination_bound(self, rng):
        e = rng.standard_normal(200) * np.linspace(0.5, 3, 200)
        v = kernel_variance(e, KernelSpec(bandwidth=0.05))
        assert np.all(v.sigma2 >= (e**2).min() - 1e-12)
        assert np.all(v.sigma2 <= (e**2).max() + 1e-12)

    def test_floor(self):
        e = np.zeros(100)
        e[0] = 1.0
        v = kernel_variance(e, KernelSpec("epanechnikov", 0.02))
        assert v.floor_applied
        assert np.all(v.sigma2 > 0)
        assert v.sigma2.min() == pytest.approx(1e-6 * v.sigma2.max())

    def test_compact_kernel_too_narrow(self):
        with pytest.raises(BandwidthError):
            kernel_variance(np.ones(100), KernelSpec("epanechnikov", 0.005))

    def test_one_break_recovered(self):
        T = 800
        lo, hi = [], []
        for s in range(10):
            e = generate_shocks(OneBreak(1.0, 5.0, 0.5), T, s).values
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BandwidthBoundaryWarning)
                v = kernel_variance(e, KernelSpec(bandwidth="cv"))
            lo.append(v.sigma2[79:320].mean())
            hi.append(v.sigma2[479:720].mean())
        assert abs(np.mean(lo) - 1) <= 0.25
        assert abs(np.mean(hi) - 25) <= 0.25 * 25

    def test_too_short(self):
        with pytest.raises(ValueError):
            kernel_variance(np.ones(2), KernelSpec(bandwidth=0.5))


class TestBandwidth:
    def test_fixed_power(self):
        assert resolve_bandwidth(KernelSpec(), None, 400) == pytest.approx(0.30171, abs=5e-6)
        assert resolve_bandwidth(KernelSpec(), None, 800) == pytest.approx(0.26265, abs=5e-6)

    def test_fixed_value(self):
        assert resolve_bandwidth(KernelSpec(bandwidth=0.2), None, 100) == 0.2

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            KernelSpec(kind="triangle")
        with pytest.raises(ValueError):
            KernelSpec(bandwidth=-0.1)
        with pytest.raises(ValueError):
            KernelSpec(bandwidth="silverman")

    def test_cv_grid(self, rng):
        cv = cv_bandwidth(rng.standard_normal(200))
        assert len(cv.grid) == 20
        assert cv.grid[0] == pytest.approx(200 ** (-2 / 3))
        assert cv.grid[-1] == pytest.approx(200 ** -0.1)
        assert cv.bandwidth in cv.grid

    def test_cv_boundary_warns(self):
        e = np.full(100, 2.0)
        with pytest.warns(BandwidthBoundaryWarning):
            b = resolve_bandwidth(KernelSpec(bandwidth="cv"), e, 100)
        assert b == pytest.approx(100 ** (-2 / 3))

    @pytest.mark.slow
    def test_cv_prefers_wider_for_iid(self):
        T, wins = 400, 0
        for s in range(100):
            iid = generate_shocks(Constant(1.0), T, 10_000 + s).values
            brk = generate_shocks(OneBreak(1.0, 5.0, 0.5), T, 20_000 + s).values
            wins += cv_bandwidth(iid).bandwidth >= cv_bandwidth(brk).bandwidth
        assert wins >= 80


class TestAdaptive:
    def test_homoskedastic_noiseless(self):
        y = noiseless_path(100, 40, 60, 70, 1.08, 0.9)
        res = adaptive_estimate(y)
        assert res.ols.dates() == res.wls.dates() == (40, 60, 70)
        assert res.ols.method == "OLS" and res.wls.method == "WLS"
        assert res.failure is None

    def test_constant_variance_gives_ols_dates(self, monkeypatch):
        import bubbledates.adaptive as ad
        y = bubble_path(77, vol=OneBreak(1, 5, 0.2))

        def flat(residuals, kernel=KernelSpec(), T=None):
            return ad.VarianceEstimate(np.full(len(residuals), 4.2), False, 0.3, "gaussian")

        monkeypatch.setattr(ad, "kernel_variance", flat)
        res = ad.adaptive_estimate(y)
        assert res.wls.dates() == res.ols.dates()

    def test_weights_are_smoothed_variance(self):
        y = bubble_path(5, vol=OneBreak(1, 5, 0.2))
        res = adaptive_estimate(y)
        assert res.variance.bandwidth == pytest.approx(400 ** -0.2)
        expected = sample_split(y, np.sqrt(res.variance.sigma2))
        assert res.wls == expected

    def test_degenerate_series_is_total(self):
        res = adaptive_estimate(np.full(101, 3.0))
        assert res.failure is not None
        assert res.wls.dates() == (None, None, None)
        assert res.variance is None
