"""Comparison models: normal SSD and Gaussian-KDE SSD.

The normal model pairs the empirical fit with hazardous-concentration
confidence limits built from noncentral-t quantiles (the classical
extrapolation-constant construction).  The KDE model uses the asymptotically
optimal normal-reference bandwidth and percentile-bootstrap intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from . import _kernels as kern
from .data_model import StandardizedSample


@dataclass(frozen=True)
class NormalFit:
    mu_hat: float
    sigma_hat: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("normal fit needs n >= 2")
        if not self.sigma_hat > 0:
            raise ValueError("sigma_hat must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu_hat) / self.sigma_hat
        return np.exp(-0.5 * z * z) / (self.sigma_hat * math.sqrt(2 * math.pi))


@dataclass(frozen=True)
class KDEFit:
    points: np.ndarray
    bandwidth: float

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.points) / self.bandwidth
        return np.exp(-0.5 * z * z).sum(axis=-1) / (
            self.points.size * self.bandwidth * math.sqrt(2 * math.pi)
        )

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.points) / self.bandwidth
        return np.mean(special.ndtr(z), axis=-1)


def fit_normal(sample) -> NormalFit:
    """Empirical mean and sample standard deviation (n-1 denominator)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    sd = float(np.std(x, ddof=1))
    if sd <= 0:
        raise ValueError("zero variance sample")
    return NormalFit(mu_hat=float(np.mean(x)), sigma_hat=sd, n=int(x.size))


def fit_normal_censored(sample: StandardizedSample) -> NormalFit:
    """Normal fit by maximum likelihood with censored contributions.

    Exact observations enter through the density, censored ones through CDF
    mass, so this reduces to :func:`fit_normal` asymptotics on exact-only
    data (the finite-sample estimates differ: MLE vs n-1 moments).
    """
    kind, oa, ob = sample.arrays()
    exact = sample.exact_values()
    if exact.size < 2:
        raise ValueError("need at least two exact values to anchor the fit")
    mu0 = float(np.mean(exact))
    ls0 = math.log(float(np.std(exact, ddof=1)))

    def negloglik(theta):
        mu, ls = theta
        sg = math.exp(ls)
        return -sum(
            kern.obs_log_kernel(int(kind[i]), oa[i], ob[i], mu, sg) for i in range(kind.size)
        )

    res = optimize.minimize(negloglik, np.array([mu0, ls0]), method="Nelder-Mead")
    mu, ls = res.x
    return NormalFit(mu_hat=float(mu), sigma_hat=float(math.exp(ls)), n=sample.n)


def extrapolation_constant(n: int, p: float, q: float) -> float:
    """k such that mu - k s is the q-quantile estimator of the p-quantile.

    Built from the noncentral-t distribution of sqrt(n)(mu_hat - x_p)/s_hat
    with noncentrality -z_p sqrt(n).
    """
    z_p = stats.norm.ppf(p)
    delta = -z_p * math.sqrt(n)
    return float(stats.nct.ppf(q, df=n - 1, nc=delta) / math.sqrt(n))


def normal_hc_ci(fit: NormalFit, p: float, level: float) -> tuple[float, float, float]:
    """Median-unbiased hazardous-quantile estimate with confidence bounds.

    Returns (point, lower, upper): point uses the median extrapolation
    constant, bounds the (1 +/- level)/2 noncentral-t quantiles.
    """
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must lie in (0, 0.5), got {p}")
    if not 0.5 < level < 1.0:
        raise ValueError(f"level must lie in (0.5, 1), got {level}")
    point = fit.mu_hat - extrapolation_constant(fit.n, p, 0.5) * fit.sigma_hat
    lower = fit.mu_hat - extrapolation_constant(fit.n, p, (1 + level) / 2) * fit.sigma_hat
    upper = fit.mu_hat - extrapolation_constant(fit.n, p, (1 - level) / 2) * fit.sigma_hat
    return point, lower, upper


def silverman_bandwidth(sample) -> float:
    x = np.asarray(sample, dtype=float)
    sd = float(np.std(x, ddof=1))
    if sd <= 0:
        raise ValueError("zero variance sample")
    return 1.06 * sd * x.size ** (-0.2)


def fit_kde(sample) -> KDEFit:
    """Gaussian KDE with the normal-reference bandwidth 1.06 sd n^(-1/5)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    return KDEFit(points=x.copy(), bandwidth=silverman_bandwidth(x))


def kde_quantile(fit: KDEFit, p: float) -> float:
    """Invert the KDE CDF by bisection to an interval of width 1e-10."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    h = fit.bandwidth
    lo = float(fit.points.min()) - 10.0 * h
    hi = float(fit.points.max()) + 10.0 * h
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if float(fit.cdf(mid)) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _bootstrap_quantiles(x: np.ndarray, p: float, n_boot: int, seed: int) -> np.ndarray:
    """KDE p-quantile for each bootstrap resample; replicate-wise substreams."""
    n = x.size
    children = np.random.SeedSequence(seed).spawn(n_boot)
    idx = np.empty((n_boot, n), dtype=np.int64)
    for b, child in enumerate(children):
        idx[b] = np.random.default_rng(child).integers(0, n, size=n)
    pts = x[idx]
    sd = pts.std(axis=1, ddof=1)
    if np.any(sd <= 0):
        # a degenerate resample gets its quantile from the common value
        sd = np.where(sd <= 0, 1e-12, sd)
    h = 1.06 * sd * n ** (-0.2)
    lo = pts.min(axis=1) - 10.0 * h
    hi = pts.max(axis=1) + 10.0 * h
    while np.max(hi - lo) > 1e-10:
        mid = 0.5 * (lo + hi)
        z = (mid[:, None] - pts) / h[:, None]
        cdf = np.mean(special.ndtr(z), axis=1)
        below = cdf < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def kde_bootstrap_ci(
    sample, p: float, level: float, n_boot: int = 1000, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap interval for the KDE p-quantile.

    Deterministic given the seed; the two percentile levels are taken from
    the same bootstrap draws, so intervals at nested levels are nested.
    """
    if n_boot < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0.5 < level < 1.0:
        raise ValueError(f"level must lie in (0.5, 1), got {level}")
    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    q = _bootstrap_quantiles(x, p, n_boot, seed)
    alpha = (1.0 - level) / 2.0
    return float(np.quantile(q, alpha)), float(np.quantile(q, 1.0 - alpha))
