import math

import numpy as np
import pytest
from scipy import special

from ssdbayes.baselines import (
    KDEFit,
    fit_kde,
    fit_normal,
    fit_normal_censored,
    kde_bootstrap_ci,
    kde_quantile,
    normal_hc_ci,
    silverman_bandwidth,
)
from ssdbayes.data_model import CensoredValue
from conftest import make_sample

Z95 = 1.6448536269514722  # standard normal 95th percentile (oracle constant)


class TestNormalFit:
    def test_hand_example(self):
        fit = fit_normal([-1.0, 0.0, 1.0])
        assert (fit.mu_hat, fit.sigma_hat, fit.n) == (0.0, 1.0, 3)

    def test_standardized_sample_gives_unit_fit(self, rng):
        x = rng.normal(3.0, 2.0, size=40)
        x = (x - x.mean()) / x.std(ddof=1)
        fit = fit_normal(x)
        assert abs(fit.mu_hat) < 1e-12
        assert abs(fit.sigma_hat - 1.0) < 1e-12

    def test_zero_variance(self):
        with pytest.raises(ValueError, match="variance"):
            fit_normal([5.0, 5.0])


class TestNormalHcCi:
    def test_large_n_limit_matches_normal_quantile(self):
        fit = fit_normal([-1.0, 0.0, 1.0])
        fit = type(fit)(mu_hat=0.0, sigma_hat=1.0, n=10**6)
        point, lower, upper = normal_hc_ci(fit, 0.05, 0.95)
        assert point == pytest.approx(-Z95, abs=1e-3)
        assert lower < point < upper

    def test_ordering(self):
        fit = fit_normal(np.arange(10.0))
        point, lower, upper = normal_hc_ci(fit, 0.05, 0.95)
        assert lower <= point <= upper

    def test_half_widths_scale_linearly_in_sigma(self):
        base = type(fit_normal([0.0, 1.0]))(mu_hat=0.3, sigma_hat=1.0, n=12)
        double = type(base)(mu_hat=0.3, sigma_hat=2.0, n=12)
        p1, l1, u1 = normal_hc_ci(base, 0.05, 0.95)
        p2, l2, u2 = normal_hc_ci(double, 0.05, 0.95)
        assert (p2 - l2) == pytest.approx(2 * (p1 - l1), rel=1e-12)
        assert (u2 - p2) == pytest.approx(2 * (u1 - p1), rel=1e-12)

    def test_widths_shrink_with_n(self):
        widths = []
        for n in (10, 20, 50, 100):
            fit = type(fit_normal([0.0, 1.0]))(mu_hat=0.0, sigma_hat=1.0, n=n)
            _, lower, upper = normal_hc_ci(fit, 0.05, 0.95)
            widths.append(upper - lower)
        assert all(b < a for a, b in zip(widths, widths[1:]))

    def test_p_validation(self):
        fit = fit_normal([-1.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="p must"):
            normal_hc_ci(fit, 0.6, 0.95)


class TestCensoredNormalFit:
    def test_matches_mle_on_exact_data(self, rng):
        x = rng.normal(0.5, 1.3, size=60)
        sample = make_sample(x)
        fit = fit_normal_censored(sample)
        assert fit.mu_hat == pytest.approx(float(x.mean()), abs=1e-4)
        assert fit.sigma_hat == pytest.approx(float(x.std(ddof=0)), abs=1e-3)

    def test_censoring_pulls_the_fit(self):
        vals = [CensoredValue.exact(v) for v in (-0.3, 0.1, 0.4, 0.8)]
        sample_plain = make_sample(vals)
        sample_left = make_sample(vals + [CensoredValue.left(-2.0)] * 3)
        lo = fit_normal_censored(sample_left)
        hi = fit_normal_censored(sample_plain)
        assert lo.mu_hat < hi.mu_hat  # mass below -2 drags the mean down


class TestKde:
    def test_silverman_bandwidth_example(self):
        # oracle: 1.06 * sqrt(2) * 2^-0.2 = 1.30501...
        assert silverman_bandwidth([-1.0, 1.0]) == pytest.approx(
            1.06 * math.sqrt(2) * 2 ** (-0.2), rel=1e-12
        )
        assert silverman_bandwidth([-1.0, 1.0]) == pytest.approx(1.3050, abs=1e-4)

    def test_density_integrates_to_one(self, rng):
        fit = fit_kde(rng.standard_normal(25))
        grid = np.arange(-10, 10 + 0.005, 0.01)
        mass = np.trapezoid(fit.pdf(grid), dx=0.01)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_symmetric_median(self):
        fit = fit_kde([-1.0, 1.0])
        assert kde_quantile(fit, 0.5) == pytest.approx(0.0, abs=1e-9)

    def test_near_degenerate_sample(self):
        fit = KDEFit(points=np.array([0.0, 1e-9]), bandwidth=1e-6)
        assert kde_quantile(fit, 0.5) == pytest.approx(0.0, abs=1e-6)

    def test_quantile_strictly_increasing(self, rng):
        fit = fit_kde(rng.standard_normal(15))
        qs = [kde_quantile(fit, p) for p in np.linspace(0.05, 0.95, 10)]
        assert all(b > a for a, b in zip(qs, qs[1:]))

    def test_zero_variance(self):
        with pytest.raises(ValueError, match="variance"):
            fit_kde([2.0, 2.0, 2.0])


class TestKdeBootstrap:
    def test_deterministic(self, rng):
        x = rng.standard_normal(30)
        a = kde_bootstrap_ci(x, 0.05, 0.95, n_boot=200, seed=5)
        b = kde_bootstrap_ci(x, 0.05, 0.95, n_boot=200, seed=5)
        assert a == b

    def test_nested_levels(self, rng):
        x = rng.standard_normal(30)
        wide = kde_bootstrap_ci(x, 0.05, 0.95, n_boot=300, seed=7)
        narrow = kde_bootstrap_ci(x, 0.05, 0.60, n_boot=300, seed=7)
        assert wide[0] <= narrow[0] <= narrow[1] <= wide[1]

    def test_minimum_replicates(self, rng):
        with pytest.raises(ValueError, match="100"):
            kde_bootstrap_ci(rng.standard_normal(10), 0.05, 0.95, n_boot=50, seed=0)

    def test_coverage_of_true_quantile(self):
        # n = 200 standard normal, B = 1000, 100 fixed data seeds
        hits = 0
        for seed in range(100):
            x = np.random.default_rng(seed).standard_normal(200)
            lo, hi = kde_bootstrap_ci(x, 0.05, 0.95, n_boot=1000, seed=seed)
            hits += lo <= -Z95 <= hi
        assert hits >= 85
